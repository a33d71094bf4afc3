use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{Algebra, Interstring, Symbol};

/// A validation finding. Layers and cells are 1-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Finding {
    DuplicateDestination { layer: usize, name: String },
    UndefinedSource { layer: usize, cell: usize, name: String },
    /// The name is written in this same layer and has no earlier definition,
    /// so the read would see a value that does not exist yet.
    SameLayerRead { layer: usize, cell: usize, name: String },
    UnknownOperator { layer: usize, cell: usize, op: String },
    ArityMismatch { layer: usize, cell: usize, op: String, expected: usize, got: usize },
    MalformedCell { layer: usize, cell: usize, reason: &'static str },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::DuplicateDestination { layer, name } => {
                write!(f, "duplicate destination '{name}' in layer {layer}")
            }
            Finding::UndefinedSource { layer, cell, name } => {
                write!(f, "undefined source '{name}' in layer {layer} cell {cell}")
            }
            Finding::SameLayerRead { layer, cell, name } => {
                write!(f, "layer {layer} cell {cell} reads '{name}', which is only written in the same layer")
            }
            Finding::UnknownOperator { layer, cell, op } => {
                write!(f, "unknown operator '{op}' in layer {layer} cell {cell}")
            }
            Finding::ArityMismatch { layer, cell, op, expected, got } => {
                write!(f, "operator '{op}' takes {expected} sources, got {got} (layer {layer} cell {cell})")
            }
            Finding::MalformedCell { layer, cell, reason } => {
                write!(f, "malformed cell {cell} in layer {layer}: {reason}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.findings.is_empty() {
            return f.write_str("clean");
        }
        for (i, finding) in self.findings.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{finding}")?;
        }
        Ok(())
    }
}

/// Checks write exclusivity, def-before-use against `env` plus strictly
/// earlier layers, and (when an algebra is given) operator arity.
pub fn validate(is: &Interstring, algebra: Option<&Algebra>, env: &BTreeSet<String>) -> ValidationReport {
    let mut findings = Vec::new();
    let mut defined: BTreeSet<String> = env.clone();
    for (l, layer) in is.layers.iter().enumerate() {
        let layer_no = l + 1;
        let mut written: BTreeMap<&str, usize> = BTreeMap::new();
        for cell in layer {
            if let Some(dst) = cell.dst() {
                *written.entry(dst).or_default() += 1;
            }
        }
        for (name, count) in &written {
            if *count > 1 {
                findings.push(Finding::DuplicateDestination {
                    layer: layer_no,
                    name: name.to_string(),
                });
            }
        }
        for (c, cell) in layer.iter().enumerate() {
            let cell_no = c + 1;
            let malformed = |reason| Finding::MalformedCell {
                layer: layer_no,
                cell: cell_no,
                reason,
            };
            if cell.symbols.len() < 2 {
                findings.push(malformed("needs at least a destination and an operator"));
                continue;
            }
            if cell.dst().is_none() {
                findings.push(malformed("destination must be a name"));
            }
            let Some(op) = cell.op() else {
                findings.push(malformed("operator must be a name"));
                continue;
            };
            for src in cell.sources() {
                let Symbol::Name(name) = src else { continue };
                if defined.contains(name) {
                    continue;
                }
                if written.contains_key(name.as_str()) {
                    findings.push(Finding::SameLayerRead {
                        layer: layer_no,
                        cell: cell_no,
                        name: name.clone(),
                    });
                } else {
                    findings.push(Finding::UndefinedSource {
                        layer: layer_no,
                        cell: cell_no,
                        name: name.clone(),
                    });
                }
            }
            if let Some(alg) = algebra {
                match alg.arity(op) {
                    None => findings.push(Finding::UnknownOperator {
                        layer: layer_no,
                        cell: cell_no,
                        op: op.to_string(),
                    }),
                    Some(expected) if expected != cell.sources().len() => findings.push(Finding::ArityMismatch {
                        layer: layer_no,
                        cell: cell_no,
                        op: op.to_string(),
                        expected,
                        got: cell.sources().len(),
                    }),
                    Some(_) => {}
                }
            }
        }
        defined.extend(written.keys().map(|s| s.to_string()));
    }
    ValidationReport { findings }
}
