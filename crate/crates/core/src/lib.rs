//! Finite-compensation invariant measures for quarter-plane random walks.

pub mod cli;
pub mod compensation;
pub mod conditions;
pub mod marginals;
pub mod model;
pub mod oracle;
pub mod queueing;
pub mod scalar;
pub mod spectral;
