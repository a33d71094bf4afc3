use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::earth::Region;
use crate::machine::Geometry;

use super::lower::Lowered;
use super::{AllocError, SpaceError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceRegion {
    pub path: String,
    pub callee: String,
    pub parent: Option<String>,
    /// Code followed by data.
    pub region: Region,
    pub code_len: usize,
    /// Locals, outputs, temporaries and the completion flag.
    pub data: Region,
}

/// Where every instance and named value lives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllocationMap {
    /// Top-level input and output registers.
    pub io: Option<Region>,
    pub instances: Vec<InstanceRegion>,
    /// Qualified value name (`io/a`, `top/sub@1/t`) to register.
    pub values: BTreeMap<String, usize>,
    pub free: Vec<Region>,
    /// Regions of `par` branches, pairwise.
    pub disjoint: Vec<(String, String)>,
}

impl AllocationMap {
    pub fn instance(&self, path: &str) -> Option<&InstanceRegion> {
        self.instances.iter().find(|i| i.path == path)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(io) = self.io {
            let _ = writeln!(out, "io {} {}", io.start, io.end);
        }
        for i in &self.instances {
            let _ = writeln!(
                out,
                "instance {} {} {} code={} data={}..{}",
                i.path, i.region.start, i.region.end, i.code_len, i.data.start, i.data.end
            );
        }
        for (name, reg) in &self.values {
            let _ = writeln!(out, "value {name} {reg}");
        }
        for r in &self.free {
            let _ = writeln!(out, "free {} {}", r.start, r.end);
        }
        out
    }
}

/// First fit over a free list ordered by address.
fn take(free: &mut Vec<Region>, size: usize) -> Option<Region> {
    let pos = free.iter().position(|r| r.len() >= size)?;
    let r = free[pos];
    let got = Region {
        start: r.start,
        end: r.start + size - 1,
    };
    if r.len() == size {
        free.remove(pos);
    } else {
        free[pos].start += size;
    }
    Some(got)
}

pub(crate) fn allocate_lowered(lowered: &Lowered, geometry: Geometry) -> Result<AllocationMap, SpaceError> {
    let available = geometry.n_registers() - 1;
    let needed = lowered.io.len() + lowered.instances.iter().map(|i| i.size()).sum::<usize>();
    if needed > available {
        return Err(SpaceError::Alloc(AllocError::OutOfRegisters { needed, available }));
    }
    let mut free = vec![Region {
        start: 1,
        end: available,
    }];
    let too_small = || SpaceError::Alloc(AllocError::OutOfRegisters { needed, available });
    let mut values = BTreeMap::new();
    let io = if lowered.io.is_empty() {
        None
    } else {
        let r = take(&mut free, lowered.io.len()).ok_or_else(too_small)?;
        for (k, d) in lowered.io.iter().enumerate() {
            values.insert(d.label.clone(), r.start + k);
        }
        Some(r)
    };
    let mut instances = Vec::with_capacity(lowered.instances.len());
    for inst in &lowered.instances {
        let region = take(&mut free, inst.size()).ok_or_else(too_small)?;
        let data_start = region.start + inst.code_len;
        for (k, d) in inst.data.iter().enumerate() {
            if d.value.is_some() {
                values.insert(d.label.clone(), data_start + k);
            }
        }
        instances.push(InstanceRegion {
            path: inst.path.clone(),
            callee: inst.callee.clone(),
            parent: inst.parent.map(|p| lowered.instances[p].path.clone()),
            region,
            code_len: inst.code_len,
            data: Region {
                start: data_start,
                end: region.end,
            },
        });
    }

    let mut all: Vec<Region> = instances.iter().map(|i| i.region).chain(io).collect();
    all.sort();
    if all.windows(2).any(|w| w[0].overlaps(&w[1])) {
        return Err(SpaceError::Codegen("allocated regions overlap".into()));
    }

    let mut disjoint = Vec::new();
    for par in &lowered.pars {
        let roots: Vec<Vec<usize>> = par
            .branches
            .iter()
            .map(|b| (b.children.0..b.children.1).filter(|&c| lowered.instances[c].parent == Some(par.owner)).collect())
            .collect();
        for i in 0..roots.len() {
            for j in i + 1..roots.len() {
                for &a in &roots[i] {
                    for &c in &roots[j] {
                        if instances[a].region.overlaps(&instances[c].region) {
                            return Err(SpaceError::Codegen(format!(
                                "par branches share registers: {} and {}",
                                instances[a].path, instances[c].path
                            )));
                        }
                        disjoint.push((instances[a].path.clone(), instances[c].path.clone()));
                    }
                }
            }
        }
    }

    Ok(AllocationMap {
        io,
        instances,
        values,
        free,
        disjoint,
    })
}
