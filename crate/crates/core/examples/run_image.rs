//! Loads an image, runs it with tracing and prints the cycle-by-cycle trace.

use synchronic::harness::metrics;
use synchronic::machine::{self, Geometry, MachineConfig, Trace};

fn main() {
    let text = include_str!("../fixtures/counter.img");
    let image = machine::load_image(text, Geometry::default()).expect("fixture parses");
    let result = machine::run(&image, MachineConfig::new(image.geometry), true).expect("image loads");

    let trace = Trace {
        records: result.trace.unwrap_or_default(),
        error: result.error.map(|e| (e.kind.to_string(), e.cycle)),
    };
    print!("{}", trace.to_text());
    println!("{}", metrics(&trace).expect("at least one cycle"));
    print!("final state:\n{}", machine::dump_state(&result.machine));
}
