use std::collections::BTreeMap;

use crate::machine::{Geometry, Opcode};

/// An operand before resolution: a literal, or a label/const plus an offset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Operand {
    Int(u64),
    Sym { name: String, offset: u64 },
}

impl Operand {
    pub fn sym(name: impl Into<String>) -> Self {
        Operand::Sym {
            name: name.into(),
            offset: 0,
        }
    }
}

impl std::fmt::Display for Operand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Operand::Int(v) => write!(f, "{v}"),
            Operand::Sym { name, offset: 0 } => f.write_str(name),
            Operand::Sym { name, offset } => write!(f, "{name}+{offset}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ItemKind {
    Label(String),
    Instr { opcode: Opcode, a: Operand, b: Operand },
    Data(Operand),
    /// Moves the placement counter.
    At(usize),
    Const { name: String, value: u64 },
    Entry(Vec<Operand>),
    Use { name: String, args: Vec<Operand> },
    /// Opens a named register region (a macro or module instance).
    RegionBegin(String),
    RegionEnd,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Item {
    /// 1-based source line, 0 for generated items.
    pub line: usize,
    pub kind: ItemKind,
}

impl Item {
    pub fn new(kind: ItemKind) -> Self {
        Self { line: 0, kind }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Macro {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Item>,
    pub line: usize,
}

/// A parsed `.earth` source file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub geometry: Option<Geometry>,
    pub items: Vec<Item>,
    pub macros: BTreeMap<String, Macro>,
}
