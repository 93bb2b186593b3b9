//! Mixed difference INGARCH models for ℤ-valued time series.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod dists;
pub mod error;
pub mod estimate;
pub mod evaluate;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod rng;
pub mod stationarity;

pub use error::{Error, Result};
