//! Earth: a flat, labelled assembly language one step above machine words.
//!
//! ```text
//! const K = 5
//! entry main
//! macro set(r, b) {
//!   wr1 r.b
//! }
//! main: use set(flag, 0)
//!       jmp done K       # label+int and consts are allowed as operands
//! done: halt             # sugar for `jmp 0 0`
//! flag: data 0
//! ```
//!
//! Registers are placed consecutively from index 1 (`at <idx>` pins the
//! placement counter). Every `use` of a macro expands to its own region with
//! renamed labels, so two instances never share registers. Image-format lines
//! (`config`, `reg <idx> = ...`) are accepted too, which makes
//! [`disassemble`] output re-assemblable.

mod assemble;
pub mod ast;
mod expand;
mod parse;
mod symbols;

use std::fmt::Write as _;

use thiserror::Error;

use crate::machine::{format_def, ConfigError, Geometry, Image};

pub use assemble::assemble_items;
pub use ast::{Item, ItemKind, Macro, Operand, Program};
pub use expand::expand;
pub use parse::parse_program;
pub use symbols::{Region, SymbolMap};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct AsmError {
    pub line: usize,
    pub kind: AsmErrorKind,
}

impl AsmError {
    pub fn new(line: usize, kind: AsmErrorKind) -> Self {
        Self { line, kind }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown label or const `{0}`")]
    UnknownSymbol(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("register {0} defined twice")]
    DuplicateRegister(usize),
    #[error("ran out of registers at index {0}")]
    OutOfRegisters(usize),
    #[error("unknown macro `{0}`")]
    UnknownMacro(String),
    #[error("macro `{0}` defined twice")]
    DuplicateMacro(String),
    #[error("macro `{0}` invokes itself")]
    RecursiveMacro(String),
    #[error("macro `{name}` takes {expected} arguments, got {got}")]
    MacroArity { name: String, expected: usize, got: usize },
    #[error("`{0}` is not allowed inside a macro body")]
    NotAllowedInMacro(String),
    #[error("operand out of range: {0}")]
    OperandOutOfRange(String),
    #[error("jump fan-out crosses the end ({end}) of region `{region}`")]
    RegionOverflow { region: String, end: usize },
    #[error("no entry directive")]
    NoEntry,
    #[error("invalid entry `{0}`")]
    BadEntry(String),
    #[error(transparent)]
    Config(ConfigError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AsmOptions {
    /// Reject jumps whose fan-out starts inside the enclosing macro region
    /// and runs past its end.
    pub strict_regions: bool,
}

/// An assembled image with its symbol sidecar. Data registers are recorded
/// in `image.data`, the guard map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assembly {
    pub image: Image,
    pub symbols: SymbolMap,
}

/// Parses, expands and assembles Earth source. A `config` line in the source
/// overrides `geometry`.
pub fn assemble(source: &str, geometry: Geometry, options: AsmOptions) -> Result<Assembly, AsmError> {
    let program = parse_program(source)?;
    let items = expand(&program)?;
    assemble_items(&items, program.geometry.unwrap_or(geometry), options)
}

/// Renders an image in image syntax, annotating registers with any labels
/// the symbol map binds to them. The output assembles back to the same
/// register words and entry set.
pub fn disassemble(image: &Image, symbols: Option<&SymbolMap>) -> String {
    let mut out = String::new();
    let g = image.geometry;
    writeln!(out, "config n={} w={}", g.n_registers(), g.word_width()).unwrap();
    write!(out, "entry").unwrap();
    for e in &image.entry {
        write!(out, " {e}").unwrap();
    }
    out.push('\n');
    if let Some(sym) = symbols {
        for (name, r) in &sym.regions {
            writeln!(out, "# region {name} {}..{}", r.start, r.end).unwrap();
        }
    }
    for &idx in image.words.keys() {
        write!(out, "reg {idx} = {}", format_def(image.register_def(idx))).unwrap();
        if let Some(sym) = symbols {
            let names: Vec<&str> = sym.labels_at(idx).collect();
            if !names.is_empty() {
                write!(out, "  # {}", names.join(" ")).unwrap();
            }
        }
        out.push('\n');
    }
    out
}
