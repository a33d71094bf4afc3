use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use synchronic::machine::{self, Geometry, Image, Trace};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synchronic"))
        .args(args)
        .env_remove("SYNCHRONIC_N")
        .env_remove("SYNCHRONIC_W")
        .env_remove("SYNCHRONIC_MAXCYCLES")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn eval_prints_written_names_sorted() {
    let o = cli(&["eval", fixture("shared.is").to_str().unwrap(), "--env", "a=2", "--env", "b=3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "r=25 t=5\n");
}

#[test]
fn run_reports_write_contention() {
    let o = cli(&["run", fixture("conflict.img").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("machine error") && e.contains("WriteContention(2,0)") && e.contains("cycle 2"), "{e}");
}

#[test]
fn verify_adder_exhaustively() {
    let o = cli(&["verify", fixture("adder.spc").to_str().unwrap(), "--module", "add4", "--exhaustive-bits", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("256/256 ok\n"), "{out}");
    assert!(out.contains("cycles min="));
}

#[test]
fn verify_samples_when_over_budget() {
    let o = cli(&["verify", fixture("adder.spc").to_str().unwrap(), "--module", "sum3", "--exhaustive-bits", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("mode sampled samples=10000"));
    let o = cli(&["verify", fixture("adder.spc").to_str().unwrap(), "--module", "sum3", "--samples", "50"]);
    assert!(stdout(&o).starts_with("50/50 ok"));
}

#[test]
fn run_trace_replays_to_dumped_state() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("f.img");
    let trace = dir.path().join("f.trace");
    let dump = dir.path().join("f.dump");
    let o = cli(&["asm", fixture("fanout.earth").to_str().unwrap(), "--strict", "-o", img.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = cli(&[
        "run",
        img.to_str().unwrap(),
        "--guard",
        "--trace",
        trace.to_str().unwrap(),
        "--dump",
        dump.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let g = Geometry::default();
    let image = Image::parse(&std::fs::read_to_string(&img).unwrap(), g).unwrap();
    let t = Trace::parse(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    let regs = machine::replay(&image, &t.records).unwrap();
    let dumped = Image::parse(&format!("{}entry 1\n", std::fs::read_to_string(&dump).unwrap()), g).unwrap();
    for (i, r) in regs.iter().enumerate() {
        assert_eq!(dumped.word(i), *r, "register {i}");
    }
    assert_eq!(regs[201], 11);

    let o = cli(&["metrics", trace.to_str().unwrap()]);
    assert!(stdout(&o).contains("peak_activation=4"), "{}", stdout(&o));
}

#[test]
fn spacec_writes_image_symbols_and_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tree8.img");
    let o = cli(&["spacec", fixture("reduce.spc").to_str().unwrap(), "--module", "tree8", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let sched = std::fs::read_to_string(out.with_extension("sched")).unwrap();
    assert!(sched.contains("join tree8 line=5 par CycleBalanced branches=4"), "{sched}");
    assert!(sched.contains("disjoint tree8/add8@1 tree8/add8@2"));
    let sym = std::fs::read_to_string(out.with_extension("sym")).unwrap();
    assert!(sym.contains("region tree8/add8@1 "));
    let o = cli(&["run", out.to_str().unwrap(), "--guard"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn failures_name_their_stage() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str, text: &str| {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        path.to_str().unwrap().to_string()
    };
    let cases = [
        (vec!["spacec".to_string(), p("a.spc", "module m(")], "parse"),
        (vec!["spacec".to_string(), p("b.spc", "module m(in a:uint1; out s:uint1) { s = m(a) }")], "type"),
        (
            vec!["--n".into(), "64".into(), "--w".into(), "16".into(), "spacec".into(), p("c.spc", "module m(in a:uint8, b:uint8; out s:uint8) { s = add8(a, b) }")],
            "alloc",
        ),
        (vec!["asm".to_string(), p("d.earth", "entry x\nx: jmp nowhere 0")], "codegen"),
        (vec!["run".to_string(), fixture("dup_activation.img").to_str().unwrap().to_string()], "machine"),
        (vec!["metrics".to_string(), p("e.trace", "cycle=0 active=[1 next=[]")], "parse"),
        (vec!["metrics".to_string(), p("f.trace", "")], "parse"),
        (vec!["isdag".to_string(), p("g.is", "a add x y ; a add y x")], "type"),
        (vec!["run".to_string(), "/does/not/exist".to_string()], "parse"),
        (vec!["run".to_string(), "--frobnicate".to_string()], "parse"),
    ];
    for (args, stage) in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = cli(&args);
        let e = stderr(&o);
        assert!(o.status.code() == Some(1) || o.status.code() == Some(2), "{args:?}");
        assert!(e.contains(stage), "{args:?}: {e}");
        assert_eq!(e.trim().lines().count(), 1, "{args:?}: {e}");
    }
}

#[test]
fn environment_overrides_machine_config() {
    let o = Command::new(env!("CARGO_BIN_EXE_synchronic"))
        .args(["run", fixture("counter.img").to_str().unwrap()])
        .env("SYNCHRONIC_MAXCYCLES", "3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("CycleLimitExceeded"));
    let o = Command::new(env!("CARGO_BIN_EXE_synchronic"))
        .args(["spacec", fixture("adder.spc").to_str().unwrap(), "-o", "/dev/null/x.img"])
        .env("SYNCHRONIC_N", "64")
        .env("SYNCHRONIC_W", "16")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("alloc error"), "{}", stderr(&o));
}
