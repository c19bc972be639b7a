//! Toolchain for a subset of the KUKA Robot Language: front end, type
//! checker, tree-walking interpreter, bytecode compiler and VM, and a
//! virtual-time robot simulator shared by both engines.

pub mod diag;
pub mod frontend;
pub mod semantics;
pub mod value;
pub mod interrupt;
pub mod runtime;
pub mod engine;
pub mod tree;
pub mod bytecode;
pub mod gen;
pub mod batch;
pub mod fuzz;
pub mod bench;
pub mod corpus;
