//! Sums eight bytes with a balanced tree of parallel adds and with a
//! sequential chain, and compares cycle counts.

use synchronic::machine::{Machine, MachineConfig};
use synchronic::spacec::compile;

fn main() {
    let src = include_str!("../fixtures/reduce.spc");
    let config = MachineConfig::default();
    let inputs = [3, 14, 15, 92, 65, 35, 89, 79];
    for module in ["tree8", "chain8"] {
        let c = compile(src, Some(module), &config).expect("compiles");
        let mut m = Machine::with_image(config, &c.image).expect("loads");
        for (port, v) in c.interface.inputs.iter().zip(inputs) {
            m.set_register(port.reg, v);
        }
        let stats = m.run().expect("runs");
        println!(
            "{module}: s={} cycles={} peak_activation={} mean_activation={:.2}",
            m.register(c.interface.outputs[0].reg),
            stats.cycles,
            stats.peak_activation,
            stats.mean_activation()
        );
    }
    println!("expected s={}", inputs.iter().sum::<u64>() & 0xff);
}
