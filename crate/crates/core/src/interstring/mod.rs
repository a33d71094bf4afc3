//! Interstrings: a string of layers, each a string of cells, each a short
//! string of symbols.
//!
//! In text form a newline separates layers, `;` separates cells within a
//! layer and whitespace separates symbols. A cell reads as
//! `<dst> <op> <src>...`. Every cell in a layer reads the environment as it
//! was before the layer, and all of the layer's writes land together.

mod algebra;
mod dag;
mod eval;
pub(crate) mod parse;
mod validate;

pub use algebra::{Algebra, Operator};
pub use dag::{to_dag, DagMetrics, DagNode, DataflowView, Source};
pub use eval::{evaluate, EvalError};
pub use parse::{parse_interstring, ParseError, ParseErrorKind, DEFAULT_MAX_CELL_LEN};
pub use validate::{validate, Finding, ValidationReport};

use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Name(String),
    Lit(u64),
}

impl Symbol {
    pub fn name(&self) -> Option<&str> {
        match self {
            Symbol::Name(n) => Some(n),
            Symbol::Lit(_) => None,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Name(n) => f.write_str(n),
            Symbol::Lit(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Cell {
    pub symbols: Vec<Symbol>,
}

impl Cell {
    /// The written name, if the cell is well formed enough to have one.
    pub fn dst(&self) -> Option<&str> {
        self.symbols.first().and_then(Symbol::name)
    }

    pub fn op(&self) -> Option<&str> {
        self.symbols.get(1).and_then(Symbol::name)
    }

    pub fn sources(&self) -> &[Symbol] {
        self.symbols.get(2..).unwrap_or(&[])
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.symbols.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interstring {
    pub layers: Vec<Vec<Cell>>,
    pub max_cell_len: usize,
}

impl Interstring {
    pub fn cell_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, &Cell)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(l, cells)| cells.iter().enumerate().map(move |(c, cell)| (l, c, cell)))
    }
}

impl fmt::Display for Interstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (l, layer) in self.layers.iter().enumerate() {
            if l > 0 {
                f.write_str("\n")?;
            }
            for (c, cell) in layer.iter().enumerate() {
                if c > 0 {
                    f.write_str(" ; ")?;
                }
                write!(f, "{cell}")?;
            }
        }
        Ok(())
    }
}
