//! Runs the contention fixtures and reports the machine error for each.

use synchronic::machine::{self, Geometry, MachineConfig};

fn main() {
    let fixtures = [
        ("conflict.img", include_str!("../fixtures/conflict.img")),
        ("conflict_equal.img", include_str!("../fixtures/conflict_equal.img")),
        ("conflict_free.img", include_str!("../fixtures/conflict_free.img")),
        ("dup_activation.img", include_str!("../fixtures/dup_activation.img")),
        ("sink.img", include_str!("../fixtures/sink.img")),
    ];
    for (name, text) in fixtures {
        let image = machine::load_image(text, Geometry::default()).expect("fixture parses");
        let r = machine::run(&image, MachineConfig::new(image.geometry), false).expect("loads");
        match r.error {
            Some(e) => println!("{name}: {e}"),
            None => println!("{name}: halted after {} cycles", r.stats.cycles),
        }
    }
}
