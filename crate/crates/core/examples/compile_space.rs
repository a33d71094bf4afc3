//! Compiles a Space program and prints the allocation and schedule.

use synchronic::machine::{Machine, MachineConfig};
use synchronic::spacec::compile;

fn main() {
    let src = include_str!("../fixtures/adder.spc");
    let config = MachineConfig::default();
    let c = compile(src, Some("sum3"), &config).unwrap_or_else(|e| panic!("{} error: {e}", e.stage()));
    print!("{}", c.alloc.to_text());
    print!("{}", c.schedule.to_text());

    let mut m = Machine::with_image(config, &c.image).expect("loads");
    for (port, v) in c.interface.inputs.iter().zip([5, 9, 4]) {
        m.set_register(port.reg, v);
        println!("{} = {v}", port.name);
    }
    let stats = m.run().expect("runs");
    for port in &c.interface.outputs {
        println!("{} = {}", port.name, m.register(port.reg));
    }
    println!("cycles={} peak_activation={}", stats.cycles, stats.peak_activation);
}
