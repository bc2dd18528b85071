//! Real-time tsunami inundation forecasting from offshore gauge records.
//!
//! The pipeline reduces a scenario database with proper orthogonal
//! decomposition, tracks a sequential Bayesian posterior over the scenarios as
//! observations arrive, and compares the resulting forecasts with a dynamic
//! time warping baseline.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod detect;
pub mod dtw;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod pod;
pub mod scenario;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
