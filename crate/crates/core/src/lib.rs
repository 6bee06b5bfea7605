#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Bayesian conditional density regression on `(0,1)` with tensor-product
//! B-spline series priors and variable selection over many predictors.
//!
//! The posterior mean (and second moment) of `f(y | x)` is computed without
//! MCMC: for the histogram basis (order 1) every term of the expanded
//! likelihood is a product of Dirichlet forms with a closed form, so the
//! estimator only has to average over models and basis sizes.
//!
//! Module map:
//!
//! * [`basis`]: univariate and tensor-product B-splines on `(0,1)`.
//! * [`model`]: selected predictor sets, basis allocations and the
//!   conditional density series.
//! * [`prior`]: log-pmfs and samplers for model size, inclusion, basis size
//!   and coefficient priors.
//! * [`posterior`]: Dirichlet integrals and the direct-sampling posterior
//!   moment engine.
//! * [`evaluate`]: simulation examples, true densities, L2 / Hellinger
//!   metrics and the benchmark driver.

pub mod basis;
pub mod error;
pub mod evaluate;
pub mod model;
pub mod numeric;
pub mod posterior;
pub mod prior;

pub use error::{Error, Result};
