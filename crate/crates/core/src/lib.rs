//! Lifting a small ARMv8 subset to a typed block IL, validating the lifting
//! by co-simulation, and generating weakest preconditions for loop-free
//! fragments.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bir;
pub mod cosim;
pub mod fuzz;
pub mod isa;
pub mod lifter;
pub mod sem;
pub mod sexp;
pub mod simplify;
pub mod smt;
pub mod typecheck;
pub mod wp;
