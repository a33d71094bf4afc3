//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synchronic::earth::{assemble, disassemble, AsmOptions};
use synchronic::harness::{verify, Mode, VerifyOptions};
use synchronic::interstring::{parse_interstring, to_dag, DEFAULT_MAX_CELL_LEN};
use synchronic::machine::{
    self, Geometry, Image, Instruction, Machine, MachineConfig, MachineError, MachineErrorKind, Status,
};
use synchronic::spacec::{compile, Compiled};

type Outcome = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn read(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn small() -> Geometry {
    Geometry::new(64, 16).expect("valid geometry")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Code in registers 1..48, data above. Writes and tests target the data
/// area; jumps mostly go to single registers so many runs halt cleanly.
fn random_image(rng: &mut ChaCha8Rng) -> Image {
    let g = small();
    let n = g.n_registers();
    let code_end = 48;
    let mut img = Image::new(g);
    for r in 1..code_end {
        let ins = match rng.gen_range(0..10) {
            0..=1 => Instruction::wr0(rng.gen_range(code_end..n), rng.gen_range(0..16)),
            2..=3 => Instruction::wr1(rng.gen_range(code_end..n), rng.gen_range(0..16)),
            4 => Instruction::cnd(rng.gen_range(code_end..n), rng.gen_range(0..16)),
            5 => Instruction::halt(),
            _ => {
                let t = rng.gen_range(0..code_end);
                let fan = if rng.gen_bool(0.85) { 0 } else { rng.gen_range(0..=(code_end - 1 - t).min(2)) };
                Instruction::jmp(t, fan)
            }
        };
        img.words.insert(r, ins.encode(g).expect("operands in range"));
    }
    for r in code_end..n {
        img.words.insert(r, rng.gen_range(0..1u64 << 16));
        img.data.insert(r);
    }
    let mut entry: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(1..code_end)).collect();
    entry.sort_unstable();
    entry.dedup();
    img.entry = entry;
    img
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let config = MachineConfig::new(small()).with_max_cycles(500);
    let (mut halted, mut errored) = (0, 0);
    for i in 0..100 {
        let img = random_image(&mut rng);
        let a = machine::run(&img, config, true).map_err(|e| format!("image {i}: {e}"))?;
        let b = machine::run(&img, config, true).map_err(|e| format!("image {i}: {e}"))?;
        ensure(a.trace == b.trace, || format!("image {i}: traces differ"))?;
        ensure(a.error == b.error, || format!("image {i}: errors differ"))?;
        ensure(a.machine.registers() == b.machine.registers(), || format!("image {i}: final states differ"))?;
        errored += a.error.is_some() as usize;
        halted += (a.machine.status() == Status::Halted) as usize;
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(10), || format!("took {t:?}"))?;
    Ok(format!("100 images run twice, identical traces ({halted} halt, {errored} fault, rest hit the cycle limit), {t:.2?}"))
}

fn run_fixture(name: &str) -> Result<machine::RunResult, String> {
    let img = machine::load_image(&read(name), small()).map_err(|e| format!("{name}: {e}"))?;
    machine::run(&img, MachineConfig::new(img.geometry), false).map_err(|e| format!("{name}: {e}"))
}

fn expect_error(name: &str, kind: MachineErrorKind, cycle: u64) -> Result<(), String> {
    let r = run_fixture(name)?;
    ensure(r.error == Some(MachineError { kind, cycle }), || {
        format!("{name}: expected {kind} at cycle {cycle}, got {:?}", r.error)
    })
}

fn exclusive_write() -> Outcome {
    expect_error("conflict.img", MachineErrorKind::WriteContention { reg: 2, bit: 0 }, 2)?;
    expect_error("conflict_equal.img", MachineErrorKind::WriteContention { reg: 2, bit: 0 }, 0)?;
    // Conflict-free fixtures over every initial value of their data bits.
    let mut runs = 0;
    for (name, data_reg) in [("conflict_free.img", 2usize), ("counter.img", 20)] {
        let img = machine::load_image(&read(name), small()).map_err(|e| e.to_string())?;
        let mut m = Machine::with_image(MachineConfig::new(img.geometry).with_max_cycles(1000), &img)
            .map_err(|e| e.to_string())?;
        for v in 0..1u64 << 16 {
            m.reset(&img);
            m.set_register(data_reg, v);
            if let Err(e) = m.run() {
                if matches!(e.kind, MachineErrorKind::WriteContention { .. }) {
                    return Err(format!("{name} with r{data_reg}={v}: {e}"));
                }
            }
            runs += 1;
        }
    }
    Ok(format!("contention at the expected cycles (incl. equal values); {runs} conflict-free runs clean"))
}

fn safe_marking() -> Outcome {
    expect_error("dup_activation.img", MachineErrorKind::ActivationContention(8), 0)?;
    let r = run_fixture("sink.img")?;
    ensure(r.error.is_none() && r.machine.status() == Status::Halted, || format!("sink: {:?}", r.error))?;
    Ok("duplicate activation faults; simultaneous halts absorbed by the sink".into())
}

struct CompilerRuns {
    cases: u64,
    machine_errors: u64,
    mismatches: u64,
    detail: Vec<String>,
    elapsed: Duration,
    xor8_peak: usize,
}

fn compiler_runs() -> CompilerRuns {
    let config = MachineConfig::default().with_guard_checks(true);
    let start = Instant::now();
    let table: [(&str, fn(u64, u64) -> u64, u64); 6] = [
        ("not8", |a, _| !a & 0xff, 256),
        ("and8", |a, b| a & b, 65536),
        ("or8", |a, b| a | b, 65536),
        ("xor8", |a, b| a ^ b, 65536),
        ("add4", |a, b| (a + b) & 0xf, 256),
        ("add8", |a, b| (a + b) & 0xff, 10_000),
    ];
    let mut out = CompilerRuns {
        cases: 0,
        machine_errors: 0,
        mismatches: 0,
        detail: Vec::new(),
        elapsed: Duration::ZERO,
        xor8_peak: 0,
    };
    for (name, f, expected_cases) in table {
        let c = compile("", Some(name), &config).expect("builtin compiles");
        let sampled = name == "add8";
        let opts = VerifyOptions {
            bit_budget: if sampled { 0 } else { 16 },
            samples: 10_000,
            seed: 8,
        };
        let r = verify(&c.image, &c.interface, |x| vec![f(x[0], *x.get(1).unwrap_or(&0))], config, opts);
        let mode_ok = matches!(r.mode, Mode::Sampled { .. }) == sampled;
        if r.cases != expected_cases || !mode_ok {
            out.mismatches += 1;
            out.detail.push(format!("{name}: {} cases", r.cases));
        }
        out.cases += r.cases;
        out.machine_errors += r.machine_errors;
        out.mismatches += r.failures.len() as u64 - r.machine_errors;
        if name == "xor8" {
            out.xor8_peak = r.peak_activation;
        }
        out.detail.push(format!("{name} {}/{}", r.passed, r.cases));
    }
    out.elapsed = start.elapsed();
    out
}

fn compiler_correctness(runs: &CompilerRuns) -> Outcome {
    ensure(runs.mismatches == 0 && runs.machine_errors == 0, || runs.detail.join(", "))?;
    ensure(runs.elapsed < Duration::from_secs(120), || format!("took {:?}", runs.elapsed))?;
    Ok(format!("{} in {:.2?}", runs.detail.join(", "), runs.elapsed))
}

fn contention_free(runs: &CompilerRuns) -> Outcome {
    ensure(runs.machine_errors == 0, || format!("{} machine errors", runs.machine_errors))?;
    Ok(format!("0 machine errors over {} guarded runs", runs.cases))
}

fn sharing_linearity() -> Outcome {
    for d in 1..=16u32 {
        let text: String = (1..=d).map(|i| format!("x{i} add x{} x{}\n", i - 1, i - 1)).collect();
        let is = parse_interstring(&text, DEFAULT_MAX_CELL_LEN).map_err(|e| e.to_string())?;
        let m = to_dag(&is).metrics;
        // size(x_i) = 1 + 2 size(x_{i-1}), size(x_0) = 1
        let mut expected = 1u128;
        for _ in 0..d {
            expected = 1 + 2 * expected;
        }
        ensure(is.cell_count() == d as usize, || format!("d={d}: {} cells", is.cell_count()))?;
        ensure(m.tree_expansion_size == expected && expected == (1u128 << (d + 1)) - 1, || {
            format!("d={d}: tree size {}", m.tree_expansion_size)
        })?;
    }
    Ok("d=1..16: cells=d, tree_expansion_size=2^(d+1)-1".into())
}

fn par_units(k: usize) -> String {
    let ins: Vec<String> = (0..k).map(|i| format!("a{i}:uint1")).collect();
    let outs: Vec<String> = (0..k).map(|i| format!("s{i}:uint1")).collect();
    let calls: Vec<String> = (0..k).map(|i| format!("    s{i} = unit(a{i})")).collect();
    format!(
        "module unit(in a:uint1; out s:uint1) {{\n  s = not1(a)\n}}\n\
         module fan(in {}; out {}) {{\n  par {{\n{}\n  }}\n}}\n",
        ins.join(", "),
        outs.join(", "),
        calls.join("\n")
    )
}

fn peak_of(c: &Compiled) -> Result<usize, String> {
    let r = machine::run(&c.image, MachineConfig::default().with_guard_checks(true), false).map_err(|e| e.to_string())?;
    ensure(r.error.is_none(), || format!("{:?}", r.error))?;
    Ok(r.stats.peak_activation)
}

fn parallelism(runs: &CompilerRuns) -> Outcome {
    ensure(runs.xor8_peak >= 8, || format!("xor8 peak {}", runs.xor8_peak))?;
    let mut peaks = Vec::new();
    for k in [2, 4, 8] {
        let c = compile(&par_units(k), Some("fan"), &MachineConfig::default()).map_err(|e| e.to_string())?;
        let p = peak_of(&c)?;
        ensure(p >= k, || format!("par of {k}: peak {p}"))?;
        peaks.push(format!("k={k}:{p}"));
    }
    Ok(format!("xor8 peak {}; par peaks {}", runs.xor8_peak, peaks.join(" ")))
}

/// Sum of `n` uint8 inputs as a balanced tree of `par` levels.
fn tree_source(n: usize) -> String {
    let ins: Vec<String> = (0..n).map(|i| format!("v{i}:uint8")).collect();
    let mut body = String::new();
    let mut level: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut locals = Vec::new();
    let mut fresh = 0;
    while level.len() > 1 {
        let mut next = Vec::new();
        let mut stmts = Vec::new();
        for pair in level.chunks(2) {
            let t = if level.len() == 2 {
                "s".to_string()
            } else {
                fresh += 1;
                locals.push(format!("t{fresh}:uint8"));
                format!("t{fresh}")
            };
            stmts.push(format!("{t} = add8({}, {})", pair[0], pair[1]));
            next.push(t);
        }
        if stmts.len() == 1 {
            body.push_str(&format!("  {}\n", stmts[0]));
        } else {
            body.push_str(&format!("  par {{\n    {}\n  }}\n", stmts.join("\n    ")));
        }
        level = next;
    }
    let local = if locals.is_empty() {
        String::new()
    } else {
        format!("  local {}\n", locals.join(", "))
    };
    format!("module tree(in {}; out s:uint8) {{\n{local}{body}}}\n", ins.join(", "))
}

fn chain_source(n: usize) -> String {
    let ins: Vec<String> = (0..n).map(|i| format!("v{i}:uint8")).collect();
    let mut body = "  s = add8(v0, v1)\n".to_string();
    for i in 2..n {
        body.push_str(&format!("  s = add8(s, v{i})\n"));
    }
    format!("module chain(in {}; out s:uint8) {{\n{body}}}\n", ins.join(", "))
}

fn run_once(c: &Compiled, m: &mut Machine, inputs: &[u64]) -> Result<(u64, u64), String> {
    m.reset(&c.image);
    for (p, v) in c.interface.inputs.iter().zip(inputs) {
        m.set_register(p.reg, *v);
    }
    let stats = m.run().map_err(|e| e.to_string())?;
    Ok((m.register(c.interface.outputs[0].reg), stats.cycles))
}

fn speedup() -> Outcome {
    let config = MachineConfig::default().with_guard_checks(true);
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut report = Vec::new();
    for n in [2usize, 4, 8, 16] {
        let tree = compile(&tree_source(n), None, &config).map_err(|e| e.to_string())?;
        let chain = compile(&chain_source(n), None, &config).map_err(|e| e.to_string())?;
        let mut mt = Machine::with_image(config, &tree.image).map_err(|e| e.to_string())?;
        let mut mc = Machine::with_image(config, &chain.image).map_err(|e| e.to_string())?;
        let mut cycles = (0, 0);
        for _ in 0..50 {
            let ins: Vec<u64> = (0..n).map(|_| rng.gen_range(0..256)).collect();
            let expected = ins.iter().sum::<u64>() & 0xff;
            let (t, tc) = run_once(&tree, &mut mt, &ins)?;
            let (c, cc) = run_once(&chain, &mut mc, &ins)?;
            ensure(t == c && t == expected, || format!("n={n} {ins:?}: tree {t} chain {c} expected {expected}"))?;
            cycles = (tc, cc);
        }
        if n >= 4 {
            ensure(cycles.0 < cycles.1, || format!("n={n}: tree {} vs chain {}", cycles.0, cycles.1))?;
        }
        report.push(format!("n={n} tree={} chain={}", cycles.0, cycles.1));
    }
    Ok(report.join(", "))
}

fn region_zero(m: &Machine, c: &Compiled, path: &str) -> Result<bool, String> {
    let inst = c.alloc.instance(path).ok_or_else(|| format!("no instance {path}"))?;
    Ok((inst.data.start..=inst.data.end).all(|r| m.register(r) == 0))
}

fn referential_transparency() -> Outcome {
    let config = MachineConfig::default().with_guard_checks(true);
    let ops: [(&str, fn(u64, u64) -> u64); 6] = [
        ("not8", |a, _| !a & 0xff),
        ("mov8", |a, _| a),
        ("and8", |a, b| a & b),
        ("or8", |a, b| a | b),
        ("xor8", |a, b| a ^ b),
        ("add8", |a, b| (a + b) & 0xff),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut checks = 0;
    for (name, f) in ops {
        let unary = name == "not8" || name == "mov8";
        let args = if unary { "a" } else { "a, b" };
        let src = format!("module rt(in a:uint8, b:uint8; out x:uint8) {{\n  repeat 2 {{\n    x = {name}({args})\n  }}\n}}\n");
        let c = compile(&src, None, &config).map_err(|e| e.to_string())?;
        let callee = format!("rt/{name}@1");
        let code = c.alloc.instance(&callee).ok_or("callee instance")?.region;
        let code_end = code.start + c.alloc.instance(&callee).ok_or("callee")?.code_len;
        // The callee writes the caller's local copy of `x`.
        let x_reg = *c.alloc.values.get("rt/x").ok_or("rt/x register")?;
        let mut m = Machine::with_image(config, &c.image).map_err(|e| e.to_string())?;
        for _ in 0..16 {
            let (a, b) = (rng.gen_range(0..256), rng.gen_range(0..256));
            m.reset(&c.image);
            m.set_register(c.interface.inputs[0].reg, a);
            m.set_register(c.interface.inputs[1].reg, b);
            let mut inside = false;
            let mut returns = Vec::new();
            while m.status() == Status::Running {
                m.step().map_err(|e| format!("{name}: {e}"))?;
                let now = m.active().iter().any(|&r| r >= code.start && r < code_end);
                if inside && !now {
                    ensure(region_zero(&m, &c, &callee)?, || format!("{name}: callee region dirty after return"))?;
                    returns.push(m.register(x_reg));
                }
                inside = now;
            }
            let want = f(a, b);
            ensure(m.register(c.interface.outputs[0].reg) == want, || format!("{name}({a},{b}): final x"))?;
            ensure(returns == vec![want, want], || format!("{name}({a},{b}): returns {returns:?}, want {want} twice"))?;
            checks += 1;
        }

        // The builtin as the top module, started twice on one machine.
        let top = compile("", Some(name), &config).map_err(|e| e.to_string())?;
        let mut m = Machine::with_image(config, &top.image).map_err(|e| e.to_string())?;
        let (a, b) = (rng.gen_range(0..256), rng.gen_range(0..256));
        m.set_register(top.interface.inputs[0].reg, a);
        if !unary {
            m.set_register(top.interface.inputs[1].reg, b);
        }
        let mut outs = Vec::new();
        for _ in 0..2 {
            m.restart(&top.image.entry);
            m.run().map_err(|e| e.to_string())?;
            ensure(region_zero(&m, &top, name)?, || format!("{name}: top region dirty"))?;
            outs.push(m.register(top.interface.outputs[0].reg));
        }
        ensure(outs == vec![f(a, b); 2], || format!("{name}: top-level reruns gave {outs:?}"))?;
    }
    Ok(format!("6 builtins, {checks} double calls; identical outputs and zeroed callee regions"))
}

fn roundtrips() -> Outcome {
    let g = Geometry::default();
    let mut count = 0;
    let mut dir: Vec<_> = std::fs::read_dir(fixture(""))
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    dir.sort();
    let mut images: BTreeMap<String, Image> = BTreeMap::new();
    for p in &dir {
        let name = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let text = std::fs::read_to_string(p).map_err(|e| e.to_string())?;
        match p.extension().and_then(|e| e.to_str()) {
            Some("earth") => {
                let a = assemble(&text, g, AsmOptions::default()).map_err(|e| format!("{name}: {e}"))?;
                let again = assemble(&disassemble(&a.image, Some(&a.symbols)), g, AsmOptions::default())
                    .map_err(|e| format!("{name} disassembly: {e}"))?;
                ensure(again.image == a.image, || format!("{name}: disassemble/assemble changed the image"))?;
                images.insert(name, a.image);
            }
            Some("img") => {
                images.insert(name.clone(), machine::load_image(&text, g).map_err(|e| format!("{name}: {e}"))?);
            }
            Some("spc") => {
                let ast = synchronic::spacec::parse_space(&text).map_err(|e| e.to_string())?;
                for m in &ast.modules {
                    let c = compile(&text, Some(&m.name), &MachineConfig::default()).map_err(|e| e.to_string())?;
                    let again = assemble(&disassemble(&c.image, Some(&c.symbols)), g, AsmOptions::default())
                        .map_err(|e| format!("{}: {e}", m.name))?;
                    ensure(again.image == c.image, || format!("{}: disassemble/assemble changed the image", m.name))?;
                    images.insert(format!("{name}:{}", m.name), c.image);
                }
            }
            _ => {}
        }
    }
    for (name, img) in &images {
        let text = img.to_text();
        let back = Image::parse(&text, g).map_err(|e| format!("{name}: {e}"))?;
        ensure(&back == img && back.to_text() == text, || format!("{name}: dump/load not a fixed point"))?;
        let halted = machine::run(img, MachineConfig::new(img.geometry).with_max_cycles(100_000), false)
            .map_err(|e| e.to_string())?;
        let dump = machine::dump_state(&halted.machine);
        let reloaded = Image::parse(&format!("{dump}entry 1\n"), img.geometry);
        ensure(reloaded.is_ok(), || format!("{name}: state dump does not reload"))?;
        count += 1;
    }
    Ok(format!("{count} images (fixtures and compiled modules) are fixed points"))
}

fn main() {
    let runs = compiler_runs();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("machine determinism", Box::new(determinism)),
        ("exclusive-write enforcement", Box::new(exclusive_write)),
        ("safe-marking enforcement", Box::new(safe_marking)),
        ("compiler correctness", Box::new(|| compiler_correctness(&runs))),
        ("contention-free compilation", Box::new(|| contention_free(&runs))),
        ("sharing linearity", Box::new(sharing_linearity)),
        ("operational parallelism", Box::new(|| parallelism(&runs))),
        ("parallel speedup trend", Box::new(speedup)),
        ("module referential transparency", Box::new(referential_transparency)),
        ("roundtrips", Box::new(roundtrips)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
