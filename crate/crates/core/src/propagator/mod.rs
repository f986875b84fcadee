//! Discrete short-time propagators on periodic grids, their composition over
//! time divisions, and an independent split-step reference solver.

pub mod division;
pub mod grid;
pub mod kernel;
pub mod reference;
pub mod step;

pub use crate::action::PhasePath;
pub use division::TimeDivision;
pub use grid::{Grid, SpinorField};
pub use kernel::{free_kernel, FreeKernel, FreeMultiplier, GridFft};
pub use reference::{default_substeps, reference_solve};
pub use step::{compose, short_time_step, Propagator, StepRoute};
