use std::collections::BTreeMap;

use proptest::prelude::*;
use synchronic::interstring::{evaluate, parse_interstring, to_dag, validate, Algebra, Cell, Interstring, Symbol};

fn doubling_chain(depth: usize) -> String {
    (1..=depth)
        .map(|i| format!("x{i} add x{p} x{p}", p = i - 1))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn sharing_is_linear_while_tree_expansion_is_exponential() {
    for d in 1..=16usize {
        let is = parse_interstring(&doubling_chain(d), 4).unwrap();
        let m = to_dag(&is).metrics;
        assert_eq!(m.cells, d);
        // Independent count: a tree node for x_d has two copies of x_{d-1}.
        let mut expected: u128 = 1;
        for _ in 0..d {
            expected = 1 + 2 * expected;
        }
        assert_eq!(m.tree_expansion_size, expected);
        assert_eq!(m.tree_expansion_size, (1u128 << (d + 1)) - 1);
        assert_eq!(m.depth, d);
    }
}

/// Evaluates a name by recursively expanding every definition, with no
/// sharing and no layer bookkeeping beyond "latest earlier writer".
fn tree_value(is: &Interstring, alg: &Algebra, env: &BTreeMap<String, u64>, name: &str, before_layer: usize) -> u64 {
    for l in (0..before_layer).rev() {
        if let Some(cell) = is.layers[l].iter().find(|c| c.dst() == Some(name)) {
            let args: Vec<u64> = cell
                .sources()
                .iter()
                .map(|s| match s {
                    Symbol::Lit(v) => *v,
                    Symbol::Name(n) => tree_value(is, alg, env, n, l),
                })
                .collect();
            return alg.apply(cell.op().unwrap(), &args).unwrap();
        }
    }
    env[name] & alg.mask()
}

const OPS: &[(&str, usize)] = &[("add", 2), ("xor", 2), ("and", 2), ("not", 1), ("mov", 1), ("mul", 2)];

fn random_interstring() -> impl Strategy<Value = (Interstring, BTreeMap<String, u64>)> {
    let env = proptest::collection::vec(0u64..256, 3);
    let shape = proptest::collection::vec(proptest::collection::vec((0..OPS.len(), 0usize..64, 0usize..64, 0u8..4), 1..=4), 1..=6);
    (env, shape).prop_map(|(vals, layers)| {
        let env: BTreeMap<String, u64> = vals.iter().enumerate().map(|(i, v)| (format!("e{i}"), *v)).collect();
        let mut defined: Vec<String> = env.keys().cloned().collect();
        let mut out = Vec::new();
        for (l, cells) in layers.iter().enumerate() {
            let mut layer = Vec::new();
            for (c, &(op, s1, s2, lit)) in cells.iter().enumerate() {
                let (name, arity) = OPS[op];
                let pick = |s: usize| {
                    if lit == 0 {
                        Symbol::Lit(s as u64)
                    } else {
                        Symbol::Name(defined[s % defined.len()].clone())
                    }
                };
                let mut symbols = vec![Symbol::Name(format!("v{l}_{c}")), Symbol::Name(name.into()), pick(s1)];
                if arity == 2 {
                    symbols.push(Symbol::Name(defined[s2 % defined.len()].clone()));
                }
                layer.push(Cell { symbols });
            }
            defined.extend((0..cells.len()).map(|c| format!("v{l}_{c}")));
            out.push(layer);
        }
        (Interstring { layers: out, max_cell_len: 4 }, env)
    })
}

proptest! {
    #[test]
    fn layered_evaluation_agrees_with_tree_expansion((is, env) in random_interstring()) {
        let alg = Algebra::standard(8);
        let names = env.keys().cloned().collect();
        prop_assert!(validate(&is, Some(&alg), &names).is_clean());
        let out = evaluate(&is, &alg, &env).unwrap();
        for (_, _, cell) in is.cells() {
            let name = cell.dst().unwrap();
            prop_assert_eq!(out[name], tree_value(&is, &alg, &env, name, is.layers.len()));
        }
    }

    #[test]
    fn permuting_cells_within_a_layer_changes_nothing((is, env) in random_interstring(), seed in any::<u64>()) {
        let alg = Algebra::standard(8);
        let mut shuffled = is.clone();
        for (i, layer) in shuffled.layers.iter_mut().enumerate() {
            let k = layer.len();
            layer.rotate_left((seed as usize + i) % k);
            if (seed >> i) & 1 == 1 {
                layer.reverse();
            }
        }
        prop_assert_eq!(evaluate(&is, &alg, &env).unwrap(), evaluate(&shuffled, &alg, &env).unwrap());
    }
}

#[test]
fn swap_across_many_names_uses_pre_layer_values() {
    let is = parse_interstring("a mov b ; b mov c ; c mov a", 4).unwrap();
    let env: BTreeMap<String, u64> = [("a", 1), ("b", 2), ("c", 3)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let out = evaluate(&is, &Algebra::standard(8), &env).unwrap();
    assert_eq!((out["a"], out["b"], out["c"]), (2, 3, 1));
}
