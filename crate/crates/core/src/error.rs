use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("weight evaluated at r = 0 with gamma = {gamma} > 0")]
    WeightSingularity { gamma: f64 },
    #[error("invalid weight model: {0}")]
    InvalidWeight(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("radius {r} lies outside the grid (R_max = {r_max})")]
    OutsideGrid { r: f64, r_max: f64 },
    #[error("newton iteration diverged after {iterations} iterations (scaled residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("non-finite state encountered at t = {time}")]
    NonFiniteState { time: f64 },
    #[error("time step fell below dt_min = {dt_min:e} at t = {time}")]
    StepCollapse { time: f64, dt_min: f64 },
    #[error("fixed-point iteration did not converge in {iterations} iterations (last change {change:e})")]
    NotConverged { iterations: usize, change: f64 },
    #[error("sample on the free boundary at r = {r}, t = {t}")]
    FreeBoundarySample { r: f64, t: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
