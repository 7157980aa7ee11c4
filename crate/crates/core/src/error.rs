use thiserror::Error;

use crate::spike::SpikeCounts;

/// Errors raised by fitting, estimation and evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("class {class} has {count} samples, need at least {required}")]
    DegenerateClass {
        class: usize,
        count: usize,
        required: usize,
    },

    #[error("spike count detection did not converge after {iterations} iterations (last {last:?})")]
    NonConvergence { iterations: usize, last: SpikeCounts },

    #[error("sample eigenvalue {index} coincides with another eigenvalue")]
    CoincidentEigenvalues { index: usize },

    #[error("spike {lambda} is not above the detection threshold {threshold}")]
    SubcriticalSpike { lambda: f64, threshold: f64 },

    #[error(
        "mean separation too small for estimation at this dimension (denominator {denominator:e})"
    )]
    MeanSeparation { denominator: f64 },

    #[error("quadratic form is negative ({0:e}); quantities are inconsistent")]
    NegativeVariance(f64),

    #[error("parameter outside the admissible set: {0}")]
    Inadmissible(String),

    #[error("no admissible grid point")]
    EmptyGrid,

    #[error("fit error: {0}")]
    Fit(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
