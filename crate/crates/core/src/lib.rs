//! Ensemble model output statistics (EMOS) for wind speed.
//!
//! Calibrates ensemble forecasts into truncated-normal, log-normal,
//! regime-switching or TN-LN mixture predictive distributions, fits them by
//! minimum CRPS or maximum likelihood over rolling training windows, and
//! verifies the result with proper scores, PIT/rank histograms, coverage,
//! Diebold–Mariano tests and a moment-based uniformity test.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod emos;
pub mod cli;
pub mod data_io;
pub mod error;
pub mod estimation;
pub mod optimize;
pub mod quadrature;
pub mod roots;
pub mod special;
pub mod synthetic;
pub mod verification;

pub use error::{Error, Result};
