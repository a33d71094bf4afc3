//! Textual macro expansion with per-instance label renaming.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::{Item, ItemKind, Macro, Operand, Program};
use super::{AsmError, AsmErrorKind};

struct Expander<'a> {
    macros: &'a BTreeMap<String, Macro>,
    counters: BTreeMap<String, usize>,
    stack: Vec<String>,
    out: Vec<Item>,
}

/// Flattens every `use` into a `RegionBegin`/`RegionEnd` bracketed copy of
/// the macro body. Instance `k` of macro `m` is named `m@k` (1-based, in
/// expansion order); nested instances are prefixed by their parent's name.
/// Labels defined inside a body become `<instance>/<label>`.
pub fn expand(program: &Program) -> Result<Vec<Item>, AsmError> {
    let mut ex = Expander {
        macros: &program.macros,
        counters: BTreeMap::new(),
        stack: Vec::new(),
        out: Vec::new(),
    };
    ex.items(&program.items, "", &BTreeMap::new(), &BTreeSet::new())?;
    Ok(ex.out)
}

fn substitute(op: &Operand, scope: &str, params: &BTreeMap<String, Operand>, locals: &BTreeSet<String>) -> Operand {
    match op {
        Operand::Int(v) => Operand::Int(*v),
        Operand::Sym { name, offset } => {
            if let Some(arg) = params.get(name) {
                match arg {
                    Operand::Int(v) => Operand::Int(v + offset),
                    Operand::Sym { name, offset: o } => Operand::Sym {
                        name: name.clone(),
                        offset: o + offset,
                    },
                }
            } else if locals.contains(name) {
                Operand::Sym {
                    name: format!("{scope}/{name}"),
                    offset: *offset,
                }
            } else {
                op.clone()
            }
        }
    }
}

impl Expander<'_> {
    fn items(
        &mut self,
        items: &[Item],
        scope: &str,
        params: &BTreeMap<String, Operand>,
        locals: &BTreeSet<String>,
    ) -> Result<(), AsmError> {
        let sub = |op: &Operand| substitute(op, scope, params, locals);
        for item in items {
            let line = item.line;
            let kind = match &item.kind {
                ItemKind::Label(name) if !scope.is_empty() => ItemKind::Label(format!("{scope}/{name}")),
                ItemKind::Instr { opcode, a, b } => ItemKind::Instr {
                    opcode: *opcode,
                    a: sub(a),
                    b: sub(b),
                },
                ItemKind::Data(v) => ItemKind::Data(sub(v)),
                ItemKind::Entry(ops) => ItemKind::Entry(ops.iter().map(sub).collect()),
                ItemKind::Use { name, args } => {
                    let args: Vec<Operand> = args.iter().map(sub).collect();
                    self.instantiate(name, &args, scope, line)?;
                    continue;
                }
                other => other.clone(),
            };
            self.out.push(Item { line, kind });
        }
        Ok(())
    }

    fn instantiate(&mut self, name: &str, args: &[Operand], parent: &str, line: usize) -> Result<(), AsmError> {
        let m = self
            .macros
            .get(name)
            .ok_or_else(|| AsmError::new(line, AsmErrorKind::UnknownMacro(name.to_string())))?;
        if self.stack.iter().any(|s| s == name) {
            return Err(AsmError::new(line, AsmErrorKind::RecursiveMacro(name.to_string())));
        }
        if m.params.len() != args.len() {
            return Err(AsmError::new(
                line,
                AsmErrorKind::MacroArity {
                    name: name.to_string(),
                    expected: m.params.len(),
                    got: args.len(),
                },
            ));
        }
        let k = self.counters.entry(name.to_string()).or_insert(0);
        *k += 1;
        let instance = if parent.is_empty() {
            format!("{name}@{k}")
        } else {
            format!("{parent}/{name}@{k}")
        };
        let params: BTreeMap<String, Operand> = m.params.iter().cloned().zip(args.iter().cloned()).collect();
        let locals: BTreeSet<String> = m
            .body
            .iter()
            .filter_map(|i| match &i.kind {
                ItemKind::Label(l) => Some(l.clone()),
                _ => None,
            })
            .collect();
        self.stack.push(name.to_string());
        self.out.push(Item {
            line,
            kind: ItemKind::RegionBegin(instance.clone()),
        });
        self.items(&m.body, &instance, &params, &locals)?;
        self.out.push(Item {
            line,
            kind: ItemKind::RegionEnd,
        });
        self.stack.pop();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::earth::parse::parse_program;

    #[test]
    fn renames_labels_per_instance() {
        let src = "macro spin(r) {\nloop: cnd r.0\njmp loop 0\n}\nuse spin(a)\nuse spin(b)\n";
        let items = expand(&parse_program(src).unwrap()).unwrap();
        let labels: Vec<_> = items
            .iter()
            .filter_map(|i| match &i.kind {
                ItemKind::Label(l) => Some(l.as_str()),
                _ => None,
            })
            .collect();
        assert_eq!(labels, ["spin@1/loop", "spin@2/loop"]);
        assert!(items.iter().any(|i| i.kind
            == ItemKind::Instr {
                opcode: crate::machine::Opcode::Jmp,
                a: Operand::sym("spin@2/loop"),
                b: Operand::Int(0)
            }));
    }

    #[test]
    fn detects_indirect_recursion() {
        let src = "macro a() {\nuse b()\n}\nmacro b() {\nuse a()\n}\nuse a()\n";
        let err = expand(&parse_program(src).unwrap()).unwrap_err();
        assert_eq!(err.kind, AsmErrorKind::RecursiveMacro("a".into()));
    }

    #[test]
    fn arity_and_unknown_macro() {
        let p = parse_program("macro a(x) {\nhalt\n}\nuse a()\n").unwrap();
        assert!(matches!(expand(&p).unwrap_err().kind, AsmErrorKind::MacroArity { .. }));
        let p = parse_program("use nope()\n").unwrap();
        assert_eq!(expand(&p).unwrap_err().kind, AsmErrorKind::UnknownMacro("nope".into()));
    }
}
