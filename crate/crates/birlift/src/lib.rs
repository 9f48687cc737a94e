//! File formats, the SMT solver process bridge, and the verification
//! pipeline behind the `birlift` command.

pub mod pipeline;
pub mod report;
pub mod solver;
pub mod text;
