//! Error bounds and exact simulation for Uhrig dynamical decoupling of a
//! dephasing qubit coupled to a bounded bath.

// Negated comparisons are deliberate: NaN must count as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod dd;
pub mod dyson;
pub mod linops;
pub mod random;
pub mod sequence;
pub mod simulator;
