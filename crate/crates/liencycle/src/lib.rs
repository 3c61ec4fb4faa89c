//! Numerical analysis of symmetric Liénard systems allowing a sign-function
//! discontinuity in the restoring force: limit-cycle detection, counting and
//! stability, executable hypothesis checkers, and tracing of the
//! double-limit-cycle bifurcation curve.

pub mod bifurcation;
pub mod cli;
pub mod cycles;
pub mod flow;
pub mod hypotheses;
pub mod model;
