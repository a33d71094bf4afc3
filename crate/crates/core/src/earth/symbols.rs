use std::collections::BTreeMap;
use std::fmt::Write as _;

/// A register region `[start, end]`, inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Region {
    pub start: usize,
    pub end: usize,
}

impl Region {
    pub fn contains(&self, idx: usize) -> bool {
        self.start <= idx && idx <= self.end
    }

    pub fn overlaps(&self, other: &Region) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Label addresses and instance regions produced by assembly. Serialised as
/// the `.sym` sidecar: `label <name> <idx>` and `region <name> <start> <end>`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SymbolMap {
    pub labels: BTreeMap<String, usize>,
    pub regions: BTreeMap<String, Region>,
}

impl SymbolMap {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut labels: Vec<_> = self.labels.iter().collect();
        labels.sort_by_key(|(name, &idx)| (idx, name.as_str()));
        for (name, idx) in labels {
            writeln!(out, "label {name} {idx}").unwrap();
        }
        for (name, r) in &self.regions {
            writeln!(out, "region {name} {} {}", r.start, r.end).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut map = SymbolMap::default();
        for (i, line) in text.lines().enumerate() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<usize>().map_err(|_| format!("line {}: bad number `{s}`", i + 1));
            match parts.as_slice() {
                [] => {}
                ["label", name, idx] => {
                    map.labels.insert(name.to_string(), num(idx)?);
                }
                ["region", name, start, end] => {
                    map.regions.insert(
                        name.to_string(),
                        Region {
                            start: num(start)?,
                            end: num(end)?,
                        },
                    );
                }
                _ => return Err(format!("line {}: malformed symbol line", i + 1)),
            }
        }
        Ok(map)
    }

    /// Names of labels bound to `idx`.
    pub fn labels_at(&self, idx: usize) -> impl Iterator<Item = &str> {
        self.labels
            .iter()
            .filter(move |(_, &i)| i == idx)
            .map(|(n, _)| n.as_str())
    }
}
