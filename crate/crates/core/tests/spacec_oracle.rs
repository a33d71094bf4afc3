use synchronic::machine::{Machine, MachineConfig, Status};
use synchronic::spacec::{compile, interpret_named, parse_space, typecheck, Compiled, Latency};

fn config() -> MachineConfig {
    MachineConfig::default().with_guard_checks(true)
}

/// Runs the compiled image on `inputs`; returns outputs and cycle count.
fn run(c: &Compiled, m: &mut Machine, inputs: &[u64]) -> (Vec<u64>, u64) {
    m.reset(&c.image);
    for (p, v) in c.interface.inputs.iter().zip(inputs) {
        m.set_register(p.reg, *v);
    }
    let stats = m.run().unwrap_or_else(|e| panic!("machine error {e} on {inputs:?}"));
    assert_eq!(m.status(), Status::Halted);
    let outs = c.interface.outputs.iter().map(|p| m.register(p.reg)).collect();
    (outs, stats.cycles)
}

fn region_is_zero(c: &Compiled, m: &Machine) -> bool {
    c.alloc
        .instances
        .iter()
        .all(|i| (i.data.start..=i.data.end).all(|r| m.register(r) == 0))
}

#[test]
fn add4_exhaustive_against_arithmetic() {
    let c = compile("", Some("add4"), &config()).unwrap();
    let mut m = Machine::with_image(config(), &c.image).unwrap();
    let Latency::Static(lat) = c.schedule.latency else { panic!("add4 is static") };
    for a in 0..16 {
        for b in 0..16 {
            let (out, cycles) = run(&c, &mut m, &[a, b]);
            assert_eq!(out, vec![(a + b) % 16], "{a}+{b}");
            assert_eq!(cycles, lat + 1);
            assert!(region_is_zero(&c, &m));
        }
    }
}

#[test]
fn bitwise_builtins_against_operators() {
    let ops: [(&str, fn(u64, u64) -> u64); 4] = [
        ("and8", |a, b| a & b),
        ("or8", |a, b| a | b),
        ("xor8", |a, b| a ^ b),
        ("not8", |a, _| !a & 0xff),
    ];
    for (name, f) in ops {
        let c = compile("", Some(name), &config()).unwrap();
        let mut m = Machine::with_image(config(), &c.image).unwrap();
        for a in (0..256).step_by(7) {
            for b in (0..256).step_by(11) {
                let ins: Vec<u64> = [a, b][..c.interface.inputs.len()].to_vec();
                assert_eq!(run(&c, &mut m, &ins).0, vec![f(a, b)], "{name} {a} {b}");
            }
        }
    }
}

const PROGRAMS: &str = r#"
module swap(in a:uint8, b:uint8; out x:uint8, y:uint8) {
  layers {
    x mov a ; y mov b
    x mov y ; y mov x
  }
}

module mac(in a:uint8, b:uint8, c:uint1; out s:uint8) {
  local t:uint8, u:uint8
  par {
    t = xor8(a, b)
    u = and8(a, b)
  }
  if (c) {
    s = add8(t, u)
  } else {
    layers {
      s add t 3
      s not s
    }
  }
  repeat 3 {
    layers {
      s add s a
    }
  }
}

module dyn(in a:uint8, b:uint8, c:uint1; out s:uint8, r:uint8) {
  par {
    s = mac(a, b, c)
    r = add8(a, b)
    seq { }
  }
}

module unrolled(in a:uint4; out s:uint4) {
  @unroll repeat 5 {
    layers {
      s add s a
    }
  }
}
"#;

fn programs() -> synchronic::spacec::TypedProgram {
    typecheck(&parse_space(PROGRAMS).unwrap(), 64).unwrap()
}

#[test]
fn user_modules_match_interpreter() {
    let typed = programs();
    for (name, samples) in [("swap", 64u64), ("mac", 64), ("dyn", 32), ("unrolled", 16)] {
        let c = compile(PROGRAMS, Some(name), &config()).unwrap();
        let mut m = Machine::with_image(config(), &c.image).unwrap();
        let mut x = 0x9e37_79b9_7f4a_7c15u64;
        for _ in 0..samples {
            let ins: Vec<u64> = c
                .interface
                .inputs
                .iter()
                .map(|p| {
                    x ^= x << 13;
                    x ^= x >> 7;
                    x ^= x << 17;
                    x & ((1 << p.width) - 1)
                })
                .collect();
            let want = interpret_named(&typed, name, &ins).unwrap();
            let (got, cycles) = run(&c, &mut m, &ins);
            assert_eq!(got, want, "{name} {ins:?}");
            if let Latency::Static(l) = c.schedule.latency {
                assert_eq!(cycles, l + 1, "{name} latency model");
            }
            assert!(region_is_zero(&c, &m), "{name} left residue");
        }
    }
}

#[test]
fn schedule_reports_join_strategies() {
    let c = compile(PROGRAMS, Some("dyn"), &config()).unwrap();
    let text = c.schedule.to_text();
    assert!(text.contains("FlagPolled"), "{text}");
    assert!(text.contains("par-writes dyn line="), "{text}");
    let c = compile(PROGRAMS, Some("mac"), &config()).unwrap();
    let text = c.schedule.to_text();
    assert!(text.contains("join mac line=11 par CycleBalanced branches=2"), "{text}");
    assert_eq!(c.schedule.latency, Latency::Dynamic);
}
