//! Numerical laboratory for entanglement entropies of multiparametric
//! Gaussian pure states.

pub mod config;
pub mod ensembles;
pub mod experiments;
pub mod error;
pub mod fit;
pub mod measures;
#[cfg(test)]
mod properties;
pub mod runner;
pub mod sampler;
pub mod theory;

pub use error::{Error, Result};
