//! Time-sliced path-integral propagators for the Dirac equation on periodic
//! grids, with numerical checks of their unitarity, adjoint symmetry, gauge
//! covariance, convergence and finite propagation speed.

pub mod action;
pub mod algebra;
pub mod cli;
pub mod config;
pub mod error;
pub mod fields;
pub mod propagator;
pub mod validation;

pub use error::{Error, Result};
