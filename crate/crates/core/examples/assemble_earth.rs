//! Assembles Earth source with macros and a fan-out jump, then disassembles it.

use synchronic::earth::{assemble, disassemble, AsmOptions};
use synchronic::machine::{self, Geometry, MachineConfig};

fn main() {
    let src = include_str!("../fixtures/fanout.earth");
    let asm = assemble(src, Geometry::default(), AsmOptions { strict_regions: true }).expect("assembles");
    print!("{}", asm.symbols.to_text());
    print!("{}", disassemble(&asm.image, Some(&asm.symbols)));

    let r = machine::run(&asm.image, MachineConfig::new(asm.image.geometry), false).expect("loads");
    let dst = asm.symbols.labels["dst"];
    println!(
        "cycles={} peak_activation={} dst={:#06b}",
        r.stats.cycles,
        r.stats.peak_activation,
        r.machine.register(dst)
    );
}
