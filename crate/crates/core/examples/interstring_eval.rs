//! Parses, validates and evaluates a small interstring.

use std::collections::{BTreeMap, BTreeSet};

use synchronic::interstring::{evaluate, parse_interstring, validate, Algebra, DEFAULT_MAX_CELL_LEN};

fn main() {
    let text = "t add a b ; u xor a b\nr mul t u\n";
    let is = parse_interstring(text, DEFAULT_MAX_CELL_LEN).expect("parses");
    let algebra = Algebra::standard(16);
    let free: BTreeSet<String> = ["a", "b"].map(String::from).into();

    let report = validate(&is, Some(&algebra), &free);
    println!("clean={}", report.is_clean());

    let env = BTreeMap::from([("a".to_string(), 6), ("b".to_string(), 3)]);
    for (name, v) in evaluate(&is, &algebra, &env).expect("evaluates") {
        println!("{name} = {v}");
    }
}
