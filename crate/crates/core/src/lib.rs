//! Synchronic A-Ram simulator, Earth assembler, interstrings and the
//! mini-Space compiler.

pub mod cli;
pub mod earth;
pub mod harness;
pub mod interstring;
pub mod machine;
pub mod spacec;
