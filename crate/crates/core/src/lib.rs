//! Workload forecasting with a convolution + GRU network, sliding-window
//! dataset construction, evaluation metrics and an auto-scaling simulator.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autoscale;
pub mod error;
pub mod evaluation;
pub mod neuralnet;
pub mod preprocessing;
pub mod smtf;
pub mod synthetic;
pub mod trace_model;
pub mod training;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, ErrorClass, Result};
