//! State estimation by sensor fusion.
//!
//! The crate models a linear dynamical system observed through a panel of
//! noisy sensors and provides three interchangeable views of the same
//! estimation problem: the Kalman filter over the system, a per-step fusion
//! estimate that augments the panel with the filter's prediction, and
//! constrained regressions whose fitted coefficient matrices reproduce the
//! fusion weights. On top of those sit penalty-tuned rolling nowcasts, a
//! candidate process-model selection experiment, and a boosting loop for
//! assimilating auxiliary data sources.

pub mod equiv;
pub mod error;
pub mod fusion;
pub mod kalman;
pub mod lds_core;
pub mod linalg;
pub mod modelsel;
pub mod nowcast;
pub mod regression;

pub use error::{Error, Result};
