//! Contract-based test generation for synchronous dataflow programs.

pub mod algebra;
pub mod engine;
pub mod frontend;
pub mod ir;
pub mod proof;
pub mod properties;
pub mod semantics;
pub mod smt;
pub mod templates;
