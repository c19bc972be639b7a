//! Bytecode back end: compiler, textual listing, binary image, assembler,
//! verifier and VM.

pub mod asm;
pub mod compile;
mod fuse;
pub mod image;
pub mod listing;
pub mod opcode;
pub mod verify;
pub mod vm;

pub use asm::{assemble, disassemble, AsmError};
pub use compile::compile;
pub use image::{Image, ImageError};
pub use listing::{Listing, ListingError};
pub use verify::{verify, VerifyError};
pub use vm::{run, Loaded};

use crate::semantics::CheckedProgram;

/// Compile and assemble a checked program. Compiler output always
/// assembles, so a failure here is a compiler bug.
pub fn build(prog: &CheckedProgram) -> Image {
    assemble(&compile(prog)).expect("compiler produced an unassemblable listing")
}

/// Compile, assemble and load a checked program.
pub fn load(prog: &CheckedProgram) -> Loaded {
    Loaded::load(build(prog)).expect("compiler produced an unverifiable image")
}
