use std::collections::{BTreeMap, BTreeSet};

use crate::machine::{Geometry, Image, Instruction, Opcode};

use super::ast::{Item, ItemKind, Operand};
use super::symbols::{Region, SymbolMap};
use super::{AsmError, AsmErrorKind, AsmOptions, Assembly};

enum Slot<'a> {
    Instr { opcode: Opcode, a: &'a Operand, b: &'a Operand },
    Data(&'a Operand),
}

struct Placed<'a> {
    idx: usize,
    line: usize,
    slot: Slot<'a>,
    /// Innermost enclosing region, used by the strict-region check.
    region: Option<String>,
}

/// Assembles macro-free items: pass 1 places registers and binds labels,
/// pass 2 resolves operands and encodes.
pub fn assemble_items(items: &[Item], geometry: Geometry, options: AsmOptions) -> Result<Assembly, AsmError> {
    let n = geometry.n_registers();
    let mut labels: BTreeMap<String, usize> = BTreeMap::new();
    let mut consts: BTreeMap<String, u64> = BTreeMap::new();
    let mut regions: BTreeMap<String, Region> = BTreeMap::new();
    let mut open: Vec<(String, usize)> = Vec::new();
    let mut placed: Vec<Placed> = Vec::new();
    let mut occupied: BTreeSet<usize> = BTreeSet::new();
    let mut entries: Vec<(usize, &Operand)> = Vec::new();
    let mut counter = 1usize;

    for item in items {
        let line = item.line;
        match &item.kind {
            ItemKind::Label(name) => {
                if labels.contains_key(name) || consts.contains_key(name) {
                    return Err(AsmError::new(line, AsmErrorKind::DuplicateLabel(name.clone())));
                }
                labels.insert(name.clone(), counter);
            }
            ItemKind::Const { name, value } => {
                if labels.contains_key(name) || consts.contains_key(name) {
                    return Err(AsmError::new(line, AsmErrorKind::DuplicateLabel(name.clone())));
                }
                consts.insert(name.clone(), *value);
            }
            ItemKind::At(idx) => counter = *idx,
            ItemKind::Instr { .. } | ItemKind::Data(_) => {
                if counter >= n {
                    return Err(AsmError::new(line, AsmErrorKind::OutOfRegisters(counter)));
                }
                if !occupied.insert(counter) {
                    return Err(AsmError::new(line, AsmErrorKind::DuplicateRegister(counter)));
                }
                let slot = match &item.kind {
                    ItemKind::Instr { opcode, a, b } => Slot::Instr { opcode: *opcode, a, b },
                    ItemKind::Data(v) => Slot::Data(v),
                    _ => unreachable!(),
                };
                placed.push(Placed {
                    idx: counter,
                    line,
                    slot,
                    region: open.last().map(|(name, _)| name.clone()),
                });
                counter += 1;
            }
            ItemKind::Entry(ops) => entries.extend(ops.iter().map(|op| (line, op))),
            ItemKind::RegionBegin(name) => open.push((name.clone(), counter)),
            ItemKind::RegionEnd => {
                let (name, start) = open
                    .pop()
                    .ok_or_else(|| AsmError::new(line, AsmErrorKind::Syntax("unbalanced region end".into())))?;
                if counter > start {
                    regions.insert(name, Region { start, end: counter - 1 });
                }
            }
            ItemKind::Use { name, .. } => {
                return Err(AsmError::new(line, AsmErrorKind::UnknownMacro(name.clone())));
            }
        }
    }
    if let Some((name, _)) = open.pop() {
        return Err(AsmError::new(0, AsmErrorKind::Syntax(format!("region `{name}` never closed"))));
    }

    let resolve = |op: &Operand, line: usize| -> Result<u64, AsmError> {
        match op {
            Operand::Int(v) => Ok(*v),
            Operand::Sym { name, offset } => labels
                .get(name)
                .map(|&i| i as u64)
                .or_else(|| consts.get(name).copied())
                .map(|base| base + offset)
                .ok_or_else(|| AsmError::new(line, AsmErrorKind::UnknownSymbol(name.clone()))),
        }
    };

    let mut image = Image::new(geometry);
    for p in &placed {
        let word = match p.slot {
            Slot::Data(v) => {
                let v = resolve(v, p.line)?;
                if v & !geometry.word_mask() != 0 {
                    return Err(AsmError::new(p.line, AsmErrorKind::OperandOutOfRange(format!("data value {v}"))));
                }
                image.data.insert(p.idx);
                v
            }
            Slot::Instr { opcode, a, b } => {
                let a = resolve(a, p.line)? as usize;
                let b = resolve(b, p.line)? as usize;
                let ins = Instruction { opcode, a, b };
                if opcode == Opcode::Jmp && options.strict_regions {
                    if let Some(r) = p.region.as_ref().map(|name| regions[name]) {
                        if r.contains(a) && a + b > r.end {
                            return Err(AsmError::new(
                                p.line,
                                AsmErrorKind::RegionOverflow {
                                    region: p.region.clone().unwrap(),
                                    end: r.end,
                                },
                            ));
                        }
                    }
                }
                ins.encode(geometry)
                    .map_err(|e| AsmError::new(p.line, AsmErrorKind::OperandOutOfRange(e.to_string())))?
            }
        };
        image.words.insert(p.idx, word);
    }

    if entries.is_empty() {
        return Err(AsmError::new(0, AsmErrorKind::NoEntry));
    }
    for (line, op) in entries {
        let idx = resolve(op, line)? as usize;
        if idx == 0 || idx >= n || image.entry.contains(&idx) {
            return Err(AsmError::new(line, AsmErrorKind::BadEntry(op.to_string())));
        }
        image.entry.push(idx);
    }
    image.entry.sort_unstable();

    Ok(Assembly {
        image,
        symbols: SymbolMap { labels, regions },
    })
}
