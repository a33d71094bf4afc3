//! A doubling chain: each cell reads its predecessor twice. The DAG stays
//! linear while the expanded expression tree doubles per layer.

use synchronic::interstring::{parse_interstring, to_dag, DEFAULT_MAX_CELL_LEN};

fn main() {
    println!("{:>3} {:>6} {:>12}", "d", "cells", "tree");
    for d in 1..=16 {
        let text: String = (1..=d).map(|i| format!("x{i} add x{} x{}\n", i - 1, i - 1)).collect();
        let is = parse_interstring(&text, DEFAULT_MAX_CELL_LEN).expect("parses");
        let m = to_dag(&is).metrics;
        println!("{d:>3} {:>6} {:>12}", m.cells, m.tree_expansion_size);
    }

    let shared = include_str!("../fixtures/shared.is");
    let view = to_dag(&parse_interstring(shared, DEFAULT_MAX_CELL_LEN).expect("parses"));
    print!("{}", view.metrics.to_text());
}
