use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::{Interstring, Symbol};

/// Where a cell's source value comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Source {
    /// Output of an earlier cell (index into [`DataflowView::nodes`]).
    Cell(usize),
    /// A name taken from the initial environment.
    Input(String),
    Literal(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DagNode {
    pub layer: usize,
    pub index: usize,
    pub dst: String,
    pub op: String,
    pub sources: Vec<Source>,
    /// Longest chain of cells ending here, counting this one.
    pub depth: usize,
    /// Node count of this cell's expression once every shared
    /// subexpression is copied out into a tree. Saturates.
    pub tree_size: u128,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DagMetrics {
    pub cells: usize,
    pub layers: usize,
    pub depth: usize,
    pub width: usize,
    /// Sum of `tree_size` over cells whose value no later cell reads.
    pub tree_expansion_size: u128,
}

impl DagMetrics {
    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "cells={}", self.cells).unwrap();
        writeln!(out, "layers={}", self.layers).unwrap();
        writeln!(out, "depth={}", self.depth).unwrap();
        writeln!(out, "width={}", self.width).unwrap();
        writeln!(out, "tree_expansion_size={}", self.tree_expansion_size).unwrap();
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataflowView {
    pub nodes: Vec<DagNode>,
    pub metrics: DagMetrics,
}

impl DataflowView {
    /// Def-use edges `(producer, consumer)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes.iter().enumerate().flat_map(|(i, n)| {
            n.sources.iter().filter_map(move |s| match s {
                Source::Cell(p) => Some((*p, i)),
                _ => None,
            })
        })
    }
}

/// Builds the def-use DAG. A source name refers to the most recent cell in
/// a strictly earlier layer that wrote it, or to the initial environment.
pub fn to_dag(is: &Interstring) -> DataflowView {
    let mut nodes: Vec<DagNode> = Vec::new();
    let mut latest: BTreeMap<String, usize> = BTreeMap::new();
    let mut consumed: BTreeSet<usize> = BTreeSet::new();
    for (l, layer) in is.layers.iter().enumerate() {
        let mut layer_defs = Vec::new();
        for (c, cell) in layer.iter().enumerate() {
            let sources: Vec<Source> = cell
                .sources()
                .iter()
                .map(|s| match s {
                    Symbol::Lit(v) => Source::Literal(*v),
                    Symbol::Name(n) => match latest.get(n) {
                        Some(&id) => Source::Cell(id),
                        None => Source::Input(n.clone()),
                    },
                })
                .collect();
            let mut depth = 0;
            let mut tree_size: u128 = 1;
            for s in &sources {
                match s {
                    Source::Cell(id) => {
                        consumed.insert(*id);
                        depth = depth.max(nodes[*id].depth);
                        tree_size = tree_size.saturating_add(nodes[*id].tree_size);
                    }
                    _ => tree_size = tree_size.saturating_add(1),
                }
            }
            let id = nodes.len();
            let dst = cell.dst().unwrap_or_default().to_string();
            layer_defs.push((dst.clone(), id));
            nodes.push(DagNode {
                layer: l,
                index: c,
                dst,
                op: cell.op().unwrap_or_default().to_string(),
                sources,
                depth: depth + 1,
                tree_size,
            });
        }
        latest.extend(layer_defs);
    }
    let metrics = DagMetrics {
        cells: nodes.len(),
        layers: is.layers.len(),
        depth: nodes.iter().map(|n| n.depth).max().unwrap_or(0),
        width: is.layers.iter().map(Vec::len).max().unwrap_or(0),
        tree_expansion_size: nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| !consumed.contains(i))
            .fold(0u128, |acc, (_, n)| acc.saturating_add(n.tree_size)),
    };
    DataflowView { nodes, metrics }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interstring::parse_interstring;

    fn dag(text: &str) -> DataflowView {
        to_dag(&parse_interstring(text, 4).unwrap())
    }

    #[test]
    fn shared_square_metrics() {
        let v = dag("t add a b\nr mul t t");
        assert_eq!(v.metrics.cells, 2);
        // t = 1 + 1 + 1, r = 1 + 3 + 3
        assert_eq!(v.nodes[0].tree_size, 3);
        assert_eq!(v.nodes[1].tree_size, 7);
        assert_eq!(v.metrics.tree_expansion_size, 7);
        assert_eq!(v.metrics.depth, 2);
        assert_eq!(v.edges().collect::<Vec<_>>(), vec![(0, 1), (0, 1)]);
    }

    #[test]
    fn single_cell() {
        let m = dag("r add a b").metrics;
        assert_eq!((m.depth, m.width, m.cells), (1, 1, 1));
    }

    #[test]
    fn metrics_text() {
        let text = dag("x mov 7 ; y mov 9\ns add x y").metrics.to_text();
        assert_eq!(text, "cells=3\nlayers=2\ndepth=2\nwidth=2\ntree_expansion_size=5\n");
    }
}
