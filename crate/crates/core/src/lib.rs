//! Symbolic-mathematics dataset forge.
//!
//! Random expression trees, prefix serialisation, differentiation and
//! rule-based integration, the five integration/ODE dataset generators and
//! the equivalence-based accuracy metric used to score model outputs.

pub mod calculus;
pub mod dataset;
pub mod evalkit;
pub mod expr;
pub mod prefix;
pub mod sampler;
pub mod taskgen;
