//! Probabilistic memristor networks: master-equation solution, observables,
//! Monte Carlo cross-checks and LTspice netlist generation.

pub mod circuit;
pub mod cli;
pub mod device;
pub mod error;
pub mod master;
pub mod mcsim;
pub mod netdsl;
pub mod observables;
pub mod spicegen;
pub mod statespace;
pub mod stats;

pub use error::{Error, Result};
