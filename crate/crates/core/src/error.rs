use thiserror::Error;

use crate::surface::SurfaceError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error("conformal factor out of domain: {0}")]
    Domain(String),
    #[error("numerical domain violation: {0}")]
    NumericalDomain(String),
    #[error("conformal factor {0} exceeds the exponent cap")]
    Overflow(f64),
    #[error("triangle is degenerate")]
    DegenerateTriangle,
    #[error("face {face} is degenerate")]
    DegenerateFace { face: usize },
    #[error("hypothesis not met: {0}")]
    BadHypothesis(String),
    #[error("quadrature did not reach tolerance {tolerance:e} within {intervals} subintervals")]
    QuadratureFailure { tolerance: f64, intervals: usize },
    #[error("target curvature inadmissible: {0}")]
    TargetInadmissible(String),
    #[error("minimizer has degenerate faces; no interior solution found")]
    NoInteriorSolution,
    #[error("no convergence after {0} iterations")]
    MaxIterations(usize),
    #[error("step failed after {halvings} halvings")]
    StepFailure { halvings: usize },
    #[error("hyperbolic coordinate u at vertex {vertex} reached {value} >= 0")]
    Anomaly { vertex: usize, value: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
