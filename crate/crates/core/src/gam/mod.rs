//! Binomial additive models with penalized cubic B-spline smooths.
//!
//! Each feature gets a clamped cubic B-spline basis on quantile knots, a
//! curvature penalty whose null space is the linear functions, and a
//! sum-to-zero constraint over the training rows so that components are
//! identifiable against the intercept. Coefficients are fitted with the
//! shared Adam minimizer in coordinates whitened by the intercept-only
//! penalized Hessian.

mod basis;
mod features;
mod fit;

pub use basis::SplineBasis;
pub use features::FeatureTable;
pub use fit::{
    component_curve, fit_gam, term_significance, write_curves, ComponentCurve, GamData, GamFit, GamSpec, GamTerm,
    Significance, CURVE_HEADER,
};
