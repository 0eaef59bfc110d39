use thiserror::Error;

use crate::hj::Trajectory;

/// Errors raised by the numerical engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("matrix is singular or ill-conditioned (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what}: sign residual {residual:.3e} exceeds bound {bound:.3e}")]
    Inconsistent {
        what: &'static str,
        residual: f64,
        bound: f64,
    },

    #[error("velocity Hessian not invertible at |v| = {speed:.3e} (condition estimate {condition:.3e})")]
    Regularity { speed: f64, condition: f64 },

    #[error("integration aborted at step {step}: {source}")]
    Integration {
        step: usize,
        partial: Box<Trajectory>,
        #[source]
        source: Box<Error>,
    },

    #[error("boundary-value problem not solved: {reason} (best endpoint residual {residual:.3e} after {iterations} iterations)")]
    Bvp {
        reason: String,
        residual: f64,
        iterations: usize,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
