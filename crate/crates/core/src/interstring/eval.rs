use std::collections::BTreeMap;

use thiserror::Error;

use super::{Algebra, Interstring, Symbol};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("layer {layer}: unknown operator `{op}`")]
    UnknownOperator { layer: usize, op: String },
    #[error("layer {layer}: operator `{op}` takes {expected} sources, got {got}")]
    Arity { layer: usize, op: String, expected: usize, got: usize },
    #[error("layer {layer}: `{name}` has no value")]
    Undefined { layer: usize, name: String },
    #[error("layer {layer}: malformed cell `{cell}`")]
    Malformed { layer: usize, cell: String },
}

/// Runs the interstring layer by layer. Within a layer every cell reads the
/// pre-layer environment; the layer's writes are committed together.
pub fn evaluate(
    is: &Interstring,
    algebra: &Algebra,
    env: &BTreeMap<String, u64>,
) -> Result<BTreeMap<String, u64>, EvalError> {
    let mask = algebra.mask();
    let mut env: BTreeMap<String, u64> = env.iter().map(|(k, v)| (k.clone(), v & mask)).collect();
    let mut args = Vec::new();
    for (l, layer) in is.layers.iter().enumerate() {
        let layer_no = l + 1;
        let mut commits = Vec::with_capacity(layer.len());
        for cell in layer {
            let (Some(dst), Some(op)) = (cell.dst(), cell.op()) else {
                return Err(EvalError::Malformed {
                    layer: layer_no,
                    cell: cell.to_string(),
                });
            };
            args.clear();
            for src in cell.sources() {
                args.push(match src {
                    Symbol::Lit(v) => *v,
                    Symbol::Name(n) => *env.get(n).ok_or_else(|| EvalError::Undefined {
                        layer: layer_no,
                        name: n.clone(),
                    })?,
                });
            }
            let operator = algebra.operator(op).ok_or_else(|| EvalError::UnknownOperator {
                layer: layer_no,
                op: op.to_string(),
            })?;
            if operator.arity != args.len() {
                return Err(EvalError::Arity {
                    layer: layer_no,
                    op: op.to_string(),
                    expected: operator.arity,
                    got: args.len(),
                });
            }
            commits.push((dst, algebra.apply(op, &args).expect("arity checked")));
        }
        for (dst, v) in commits {
            env.insert(dst.to_string(), v);
        }
    }
    Ok(env)
}
