use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::earth::{assemble_items, AsmOptions, Item, ItemKind, Operand, SymbolMap};
use crate::machine::{Geometry, Image, Opcode, RegisterDef};

use super::alloc::AllocationMap;
use super::lower::{JoinSchedule, Latency, Lowered, StmtSchedule};
use super::SpaceError;

/// Register-level check that the branches of one `par` write disjoint
/// registers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParCheck {
    pub instance: String,
    pub line: usize,
    pub branches: usize,
    /// Registers written by all branches together.
    pub written: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduleInfo {
    pub top: String,
    /// Cycles from entry to the final halt's activation, if static.
    pub latency: Latency,
    pub statements: Vec<StmtSchedule>,
    pub joins: Vec<JoinSchedule>,
    pub disjoint: Vec<(String, String)>,
    pub par_checks: Vec<ParCheck>,
}

impl ScheduleInfo {
    /// The `.sched` report.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "top {} cycles={}", self.top, self.latency);
        for s in &self.statements {
            let _ = writeln!(out, "stmt {} line={} {} cycles={}", s.instance, s.line, s.what, s.latency);
        }
        for j in &self.joins {
            let at = if j.line == 0 { String::new() } else { format!(" line={}", j.line) };
            let _ = writeln!(out, "join {}{at} {} {} branches={}", j.instance, j.what, j.strategy, j.branches);
        }
        for (a, b) in &self.disjoint {
            let _ = writeln!(out, "disjoint {a} {b}");
        }
        for p in &self.par_checks {
            let _ = writeln!(
                out,
                "par-writes {} line={} branches={} registers={} disjoint",
                p.instance, p.line, p.branches, p.written
            );
        }
        out
    }
}

pub(crate) fn emit(lowered: &Lowered, alloc: &AllocationMap, geometry: Geometry) -> Result<(Image, SymbolMap, ScheduleInfo), SpaceError> {
    if alloc.instances.len() != lowered.instances.len()
        || alloc
            .instances
            .iter()
            .zip(&lowered.instances)
            .any(|(a, l)| a.path != l.path || a.region.len() != l.size() || a.code_len != l.code_len)
    {
        return Err(SpaceError::Codegen("allocation does not match the program".into()));
    }
    let mut items = Vec::new();
    let mut push = |k: ItemKind| items.push(Item::new(k));
    if let Some(io) = alloc.io {
        push(ItemKind::At(io.start));
        push(ItemKind::RegionBegin("io".into()));
        for d in &lowered.io {
            push(ItemKind::Label(d.label.clone()));
            push(ItemKind::Data(Operand::Int(0)));
        }
        push(ItemKind::RegionEnd);
    }
    for (inst, a) in lowered.instances.iter().zip(&alloc.instances) {
        push(ItemKind::At(a.region.start));
        push(ItemKind::RegionBegin(inst.path.clone()));
        for k in &inst.code {
            push(k.clone());
        }
        for d in &inst.data {
            push(ItemKind::Label(d.label.clone()));
            push(ItemKind::Data(Operand::Int(0)));
        }
        push(ItemKind::RegionEnd);
    }
    push(ItemKind::Entry(vec![Operand::sym(&lowered.instances[0].entry)]));

    let asm = assemble_items(&items, geometry, AsmOptions { strict_regions: true })
        .map_err(|e| SpaceError::Codegen(format!("assembly failed: {e}")))?;
    for a in &alloc.instances {
        if asm.symbols.regions.get(&a.path) != Some(&a.region) {
            return Err(SpaceError::Codegen(format!("region of `{}` moved during assembly", a.path)));
        }
    }
    for (name, reg) in &alloc.values {
        if asm.symbols.labels.get(name) != Some(reg) {
            return Err(SpaceError::Codegen(format!("value `{name}` moved during assembly")));
        }
    }

    let mut par_checks = Vec::new();
    for par in &lowered.pars {
        let owner = &alloc.instances[par.owner];
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        for b in &par.branches {
            let mut regs: Vec<usize> = (b.code.0..b.code.1).map(|o| owner.region.start + o).collect();
            for c in b.children.0..b.children.1 {
                let r = alloc.instances[c].region;
                regs.extend(r.start..r.start + alloc.instances[c].code_len);
            }
            let written: BTreeSet<usize> = regs
                .into_iter()
                .filter_map(|r| match asm.image.register_def(r) {
                    RegisterDef::Instruction(i) if matches!(i.opcode, Opcode::Wr0 | Opcode::Wr1) => Some(i.a),
                    _ => None,
                })
                .collect();
            if let Some(r) = written.intersection(&seen).next() {
                return Err(SpaceError::Codegen(format!(
                    "branches of par at line {} in `{}` both write register {r}",
                    par.line, owner.path
                )));
            }
            seen.extend(written);
        }
        par_checks.push(ParCheck {
            instance: owner.path.clone(),
            line: par.line,
            branches: par.branches.len(),
            written: seen.len(),
        });
    }

    // Internal labels are not part of the public symbol map.
    let mut symbols = asm.symbols;
    symbols.labels.retain(|name, _| !name.contains("/.L"));

    let schedule = ScheduleInfo {
        top: lowered.top.clone(),
        latency: lowered.instances[0].latency,
        statements: lowered.statements.clone(),
        joins: lowered.joins.clone(),
        disjoint: alloc.disjoint.clone(),
        par_checks,
    };
    Ok((asm.image, symbols, schedule))
}
