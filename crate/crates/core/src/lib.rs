//! Spectrally-corrected and regularized quadratic discriminant analysis
//! for spiked covariance models, with the QDA / R-QDA / KNN baselines,
//! the random-matrix estimators the method needs, and a reproducible
//! experiment harness.

pub mod classifiers;
pub mod error;
pub mod fisher;
pub mod harness;
pub mod io;
pub mod model;
pub mod rng;
pub mod spike;

pub use error::{Error, Result};
