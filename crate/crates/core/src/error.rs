use std::io;

use thiserror::Error;

/// Errors produced by the samplers, the matrix model and the I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 1 (got {0})")]
    ZeroDimension(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("factorization failed at pivot {index} (value {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("row {row} of the factor has norm {norm} (expected 1)")]
    RowNorm { row: usize, norm: f64 },

    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelation(String),

    #[error("invalid hemisphere vector: {0}")]
    InvalidHemisphere(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("inverse CDF bisection did not converge after {0} iterations")]
    Bisection(usize),

    #[error("vine recursion produced |r| >= 1 ({0})")]
    VineRecursion(f64),

    #[error("malformed CORM1 data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
