//! Robust estimation for parametric regression with randomly right-censored
//! responses and stochastic covariates.
//!
//! The crate is organised bottom-up:
//!
//! - [`survival_data`]: censored samples, concomitant ordering and the
//!   Kaplan–Meier/Stute jump weights.
//! - [`models`]: parametric families for `Y | X` together with a normal
//!   covariate marginal, their scores and density power integrals.
//! - [`dpd`]: the density power divergence objective, its gradient and the
//!   ψ-functions that define the estimating equations.
//! - [`estimate`]: minimum divergence fits, general M-estimation and the
//!   one-step estimator.
//! - [`asymptotics`]: plug-in sandwich covariance for Stute-weighted
//!   estimating equations.
//! - [`robustness`]: influence functions and boundedness diagnostics.
//! - [`simulate`]: data generation and the Monte Carlo study harness.
//! - [`sweep`]: α-sweeps and relative variation between two datasets.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod dpd;
pub mod error;
pub mod estimate;
pub mod models;
pub mod optim;
pub mod quadrature;
pub mod robustness;
pub mod simulate;
pub mod survival_data;
pub mod sweep;

pub use error::{Error, Result};
