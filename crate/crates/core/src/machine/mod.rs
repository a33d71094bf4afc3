//! The Synchronic A-Ram: a globally clocked register array in which every
//! active register executes one of four bit-level instructions per cycle.

mod config;
mod exec;
mod image;
mod instruction;
pub mod trace;

pub use config::{ConfigError, Geometry, MachineConfig};
pub use exec::{
    dump_state, replay, run, LoadError, Machine, MachineError, MachineErrorKind, RunResult, RunStats,
    Status,
};
pub use image::{format_def, Image, ImageError, ImageErrorKind, RegisterDef};
pub(crate) use image::{parse_uint, strip_comment};
pub use instruction::{EncodeError, Instruction, Opcode};
pub use trace::{BitWrite, Trace, TraceError, TraceRecord};

/// Parses image text (`load_image`).
pub fn load_image(text: &str, default_geometry: Geometry) -> Result<Image, ImageError> {
    Image::parse(text, default_geometry)
}
