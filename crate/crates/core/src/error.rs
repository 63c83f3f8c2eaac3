use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {0} lies outside the unit disk")]
    OutOfDomain(String),

    #[error("target at radius {radius} is closer than one radial cell to the boundary")]
    NearBoundary { radius: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("source iteration diverged after {iterations} iterations (last relative update {last_update:.3e})")]
    Diverged { iterations: usize, last_update: f64 },

    #[error("h-function accuracy: negative angular mode mass {mass:.3e} exceeds {threshold:.3e}")]
    HAccuracy { mass: f64, threshold: f64 },

    #[error("inconsistent data: range residual {residual:.3e} exceeds {threshold:.3e}")]
    DataConsistency { residual: f64, threshold: f64 },

    #[error("medium is not subcritical: min(a - k0) = {min_sigma:.3e}")]
    NotSubcritical { min_sigma: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
