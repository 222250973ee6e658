//! Radially symmetric finite-volume simulation of the weighted porous medium
//! equation `rho(x) u_t = Delta(u^m)` with `rho ~ |x|^{-gamma}`, together with
//! exact solutions, norms, potentials and estimate checks.

pub mod error;
pub mod grid;
pub mod harness;
pub mod norms;
pub mod oracle;
pub mod params;
pub mod potential;
pub mod quadrature;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
pub use grid::{Field, Grading, RadialGrid, Trajectory};
pub use params::{Params, ScalingConstants};
pub use solver::{BoundaryCondition, BoundaryPressure, StepControl};
pub use weights::WeightModel;
