//! Patrol-effort rasterization and nested logistic deterrence models.
//!
//! The crate is organised as a pipeline:
//!
//! - [`geogrid`] turns GPS waypoints and observation records into cell × bin
//!   rasters of kilometres patrolled and illegal-activity counts.
//! - [`panel`] turns those rasters into standardized regression rows with
//!   lagged covariates and neighbour-window sums.
//! - [`model`] defines the three nested logistic models (past effort, past
//!   illegal activity, past illegal activity plus neighbours), their
//!   likelihood and gradient, and fits them with [`optimizer`].
//! - [`simulator`] generates synthetic parks from known parameters so that
//!   every fitted coefficient can be checked against ground truth.
//! - [`gam`] fits a binomial additive model with penalized B-spline smooths
//!   for per-feature effect curves.
//! - [`report`] renders fitted coefficients as fixed-precision tables.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gam;
pub mod geogrid;
pub mod kv;
pub mod model;
pub mod optimizer;
pub mod panel;
pub mod report;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
