//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error(
        "matrix of size {n} not positive definite after jitter escalation up to {max_jitter:e} \
         (diagonal range [{diag_min:e}, {diag_max:e}])"
    )]
    NotPositiveDefinite {
        n: usize,
        max_jitter: f64,
        diag_min: f64,
        diag_max: f64,
    },

    #[error("QP projection did not converge after {iterations} iterations (KKT residual {residual:e})")]
    QpNoConvergence { iterations: usize, residual: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O failure on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
