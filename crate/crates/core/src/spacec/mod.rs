//! mini-Space: a strictly typed, explicitly parallel language compiled to
//! Synchronic A-Ram images.
//!
//! Pipeline: [`parse_space`] → [`typecheck`] → [`allocate`] → [`codegen`].
//! [`compile`] runs all four. Each call site gets its own statically
//! expanded instance region holding its code, its locals and a completion
//! flag; values are one `uintN` per register.

mod alloc;
pub mod ast;
mod codegen;
pub mod interp;
mod lower;
mod parse;
mod typecheck;

use thiserror::Error;

use crate::earth::SymbolMap;
use crate::machine::{Image, MachineConfig};

pub use alloc::{AllocationMap, InstanceRegion};
pub use codegen::{ParCheck, ScheduleInfo};
pub use interp::{interpret, interpret_named};
pub use lower::{JoinSchedule, JoinStrategy, Latency, StmtSchedule};
pub use parse::parse_space;
pub(crate) use typecheck::mask as mask_bits;
pub use typecheck::{
    typecheck, Builtin, BuiltinOp, Callee, Signature, TModule, TStmt, TypeErrorKind, TypedProgram, Var, VarKind,
};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AllocError {
    #[error("machine too small: {needed} registers needed, {available} available")]
    OutOfRegisters { needed: usize, available: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SpaceError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("type error at line {line}: {kind}")]
    Type { line: usize, kind: TypeErrorKind },
    #[error("type error: no module or builtin named `{0}`")]
    UnknownTop(String),
    #[error("type error: the source defines no modules")]
    NoModules,
    #[error("alloc error: {0}")]
    Alloc(AllocError),
    #[error("codegen error: {0}")]
    Codegen(String),
}

impl SpaceError {
    pub fn stage(&self) -> &'static str {
        match self {
            SpaceError::Parse { .. } => "parse",
            SpaceError::Type { .. } | SpaceError::UnknownTop(_) | SpaceError::NoModules => "type",
            SpaceError::Alloc(_) => "alloc",
            SpaceError::Codegen(_) => "codegen",
        }
    }
}

/// A top-level parameter and the register it is passed in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Port {
    pub name: String,
    pub width: u32,
    pub reg: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interface {
    pub module: String,
    pub inputs: Vec<Port>,
    pub outputs: Vec<Port>,
}

impl Interface {
    pub fn input_bits(&self) -> u32 {
        self.inputs.iter().map(|p| p.width).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Compiled {
    pub image: Image,
    pub symbols: SymbolMap,
    pub schedule: ScheduleInfo,
    pub alloc: AllocationMap,
    pub interface: Interface,
}

impl Compiled {
    /// Data region of the top instance, which must read all-zero whenever
    /// the module is not running.
    pub fn top_region(&self) -> &InstanceRegion {
        &self.alloc.instances[0]
    }
}

/// Computes the allocation for compiling `top`.
pub fn allocate(typed: &TypedProgram, top: &str, config: &MachineConfig) -> Result<AllocationMap, SpaceError> {
    let lowered = lower::lower(typed, top, config.geometry)?;
    alloc::allocate_lowered(&lowered, config.geometry)
}

/// Generates the image for `top` under a previously computed allocation.
pub fn codegen(
    typed: &TypedProgram,
    top: &str,
    alloc: &AllocationMap,
    config: &MachineConfig,
) -> Result<(Image, SymbolMap, ScheduleInfo), SpaceError> {
    let lowered = lower::lower(typed, top, config.geometry)?;
    codegen::emit(&lowered, alloc, config.geometry)
}

/// Compiles already typechecked source.
pub fn compile_typed(typed: &TypedProgram, top: &str, config: &MachineConfig) -> Result<Compiled, SpaceError> {
    let lowered = lower::lower(typed, top, config.geometry)?;
    let alloc = alloc::allocate_lowered(&lowered, config.geometry)?;
    let (image, symbols, schedule) = codegen::emit(&lowered, &alloc, config.geometry)?;
    let port = |(name, width, label): &(String, u32, String)| Port {
        name: name.clone(),
        width: *width,
        reg: alloc.values[label],
    };
    let interface = Interface {
        module: lowered.top.clone(),
        inputs: lowered.inputs.iter().map(port).collect(),
        outputs: lowered.outputs.iter().map(port).collect(),
    };
    Ok(Compiled {
        image,
        symbols,
        schedule,
        alloc,
        interface,
    })
}

/// Parses, typechecks and compiles `top` (default: the last module in the
/// source). A builtin such as `add4` may be named as the top.
pub fn compile(text: &str, top: Option<&str>, config: &MachineConfig) -> Result<Compiled, SpaceError> {
    let ast = parse_space(text)?;
    let typed = typecheck(&ast, config.geometry.word_width())?;
    let top = match top {
        Some(t) => t.to_string(),
        None => typed.default_top().ok_or(SpaceError::NoModules)?.to_string(),
    };
    compile_typed(&typed, &top, config)
}
