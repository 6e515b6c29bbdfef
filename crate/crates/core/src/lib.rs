//! Hybrid mathematical-model / neural-network predictors.
//!
//! A small feed-forward network predicts one or more *subfunctions* of a known
//! mathematical model; the model consumes those values and produces the final
//! prediction. All network weights are searched jointly by CMA-ES on the model
//! output error. A gradient-trained dense network is provided as the black-box
//! baseline, together with the quadrature-based accuracy indicator and the
//! experiment harness used to compare the two.
//!
//! Module map:
//!
//! - [`quadrature`]: Gauss-Legendre rules and the error integral `R`.
//! - [`benchmarks`]: target systems and the nine model formulations `f1..f9`.
//! - [`network`]: the subfunction network, its flat weight layout and dimensionality.
//! - [`hybrid`]: the composed predictor and its training fitness.
//! - [`cmaes`]: the ask/tell evolution strategy.
//! - [`baseline`]: dense network, backpropagation and Adam training.
//! - [`harness`]: grid datasets, best-of-k restarts, sweeps, CSV and plot output.

// `!(a < b)` is used deliberately so NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod benchmarks;
pub mod cmaes;
mod error;
pub mod harness;
pub mod hybrid;
pub mod network;
pub mod quadrature;

pub use error::{Error, Result};
