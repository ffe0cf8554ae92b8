//! Simulation of reflection-based estimators for the trace distance and
//! fidelity of two pure states, together with the samplized variant in which
//! every reflection oracle is replaced by density-matrix exponentiation on
//! copies of the state.

pub mod channel;
pub mod circuits;
pub mod linalg;
pub mod reflections;
pub mod rng;
pub mod states;
pub mod samplizer;
pub mod estimators;
