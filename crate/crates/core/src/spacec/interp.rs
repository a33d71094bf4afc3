//! Reference interpreter for typed mini-Space. It shares no code with the
//! lowering and serves as the oracle for compiled images.

use std::collections::BTreeMap;

use crate::interstring::Symbol;

use super::typecheck::{mask, BuiltinOp, Callee, TStmt, TypedProgram};

/// Runs `callee` on `inputs` (one value per input parameter) and returns its
/// outputs. Inputs are masked to their declared widths.
pub fn interpret(prog: &TypedProgram, callee: Callee, inputs: &[u64]) -> Vec<u64> {
    match callee {
        Callee::Builtin(b) => {
            let args: Vec<u64> = inputs.iter().map(|v| v & mask(b.width)).collect();
            vec![b.op.apply(&args, b.width)]
        }
        Callee::User(i) => {
            let m = &prog.modules[i];
            let mut env = Env::default();
            for (v, x) in m.inputs.iter().zip(inputs) {
                env.set(&v.name, *x, v.width);
            }
            for v in m.outputs.iter().chain(&m.locals) {
                env.set(&v.name, 0, v.width);
            }
            exec_block(prog, &mut env, &m.body);
            m.outputs.iter().map(|v| env.get(&v.name)).collect()
        }
    }
}

/// Convenience wrapper resolving a module or builtin by name.
pub fn interpret_named(prog: &TypedProgram, name: &str, inputs: &[u64]) -> Option<Vec<u64>> {
    prog.resolve(name).map(|c| interpret(prog, c, inputs))
}

#[derive(Default)]
struct Env {
    values: BTreeMap<String, (u64, u32)>,
}

impl Env {
    fn set(&mut self, name: &str, v: u64, width: u32) {
        self.values.insert(name.to_string(), (v & mask(width), width));
    }

    fn assign(&mut self, name: &str, v: u64) {
        let e = self.values.get_mut(name).expect("typechecked name");
        e.0 = v & mask(e.1);
    }

    fn get(&self, name: &str) -> u64 {
        self.values[name].0
    }

    fn width(&self, name: &str) -> u32 {
        self.values[name].1
    }
}

fn exec_block(prog: &TypedProgram, env: &mut Env, stmts: &[TStmt]) {
    for s in stmts {
        exec(prog, env, s);
    }
}

fn exec(prog: &TypedProgram, env: &mut Env, s: &TStmt) {
    match s {
        TStmt::Call {
            callee, args, targets, ..
        } => {
            let vals: Vec<u64> = args.iter().map(|a| env.get(a)).collect();
            let outs = interpret(prog, *callee, &vals);
            for (t, v) in targets.iter().zip(outs) {
                env.assign(t, v);
            }
        }
        TStmt::Layers { is, .. } => {
            for layer in &is.layers {
                let mut writes = Vec::new();
                for cell in layer {
                    let dst = cell.dst().expect("typechecked cell");
                    let width = env.width(dst);
                    let args: Vec<u64> = cell
                        .sources()
                        .iter()
                        .map(|s| match s {
                            Symbol::Name(n) => env.get(n),
                            Symbol::Lit(v) => *v,
                        })
                        .collect();
                    let op = BuiltinOp::from_name(cell.op().expect("typechecked cell")).expect("layer op");
                    writes.push((dst, op.apply(&args, width)));
                }
                for (d, v) in writes {
                    env.assign(d, v);
                }
            }
        }
        // Branches of a par touch disjoint names, so any order agrees.
        TStmt::Seq(b) | TStmt::Par { branches: b, .. } => exec_block(prog, env, b),
        TStmt::If {
            cond,
            then_body,
            else_body,
            ..
        } => {
            if env.get(cond) & 1 == 1 {
                exec_block(prog, env, then_body)
            } else {
                exec_block(prog, env, else_body)
            }
        }
        TStmt::Repeat { count, body, .. } => {
            for _ in 0..*count {
                exec_block(prog, env, body);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spacec::{parse_space, typecheck};

    fn prog(src: &str) -> TypedProgram {
        typecheck(&parse_space(src).unwrap(), 64).unwrap()
    }

    #[test]
    fn builtins_mask_to_width() {
        let p = prog("");
        assert_eq!(interpret_named(&p, "add4", &[9, 9]), Some(vec![2]));
        assert_eq!(interpret_named(&p, "not8", &[0x0f]), Some(vec![0xf0]));
    }

    #[test]
    fn layers_read_pre_layer_values() {
        let p = prog("module swap(in a:uint8, b:uint8; out x:uint8, y:uint8) {\n layers {\n x mov a ; y mov b\n x mov y ; y mov x\n }\n}");
        assert_eq!(interpret_named(&p, "swap", &[3, 7]), Some(vec![7, 3]));
    }

    #[test]
    fn control_flow() {
        let p = prog(
            "module m(in c:uint1, a:uint8; out s:uint8) {\n\
             if (c) { repeat 3 { layers {\n s add s a\n } } } else { s = not8(a) }\n}",
        );
        assert_eq!(interpret_named(&p, "m", &[1, 5]), Some(vec![15]));
        assert_eq!(interpret_named(&p, "m", &[0, 5]), Some(vec![250]));
    }
}
