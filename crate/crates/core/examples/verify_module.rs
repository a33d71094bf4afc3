//! Verifies compiled modules against an arithmetic oracle: exhaustively when
//! the inputs are narrow, by seeded sampling when they are not.

use synchronic::harness::{verify, VerifyOptions};
use synchronic::machine::MachineConfig;
use synchronic::spacec::compile;

fn main() {
    let config = MachineConfig::default().with_guard_checks(true);
    let cases: [(&str, fn(&[u64]) -> u64); 3] = [
        ("add4", |x| (x[0] + x[1]) & 0xf),
        ("xor8", |x| x[0] ^ x[1]),
        ("add16", |x| (x[0] + x[1]) & 0xffff),
    ];
    for (name, oracle) in cases {
        let c = compile("", Some(name), &config).expect("builtin compiles");
        let opts = VerifyOptions {
            samples: 2000,
            ..VerifyOptions::default()
        };
        let report = verify(&c.image, &c.interface, |x| vec![oracle(x)], config, opts);
        println!("{name}:\n{report}");
    }
}
