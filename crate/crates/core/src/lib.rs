//! Least-squares regression with misclassified categorical covariates.
//!
//! Observed categories `W` are noisy versions of true categories `X`, with a
//! known misclassification matrix per covariate. Regressing `y` on the dummy
//! coded `W` attenuates the slopes; this crate computes the naive fit, the
//! moment-based slope correction, the posterior-based intercept correction,
//! and the conditional bias and variance of the corrected estimators. The
//! [`simkit`] module runs seeded Monte Carlo studies over scenario grids.

// `!(x > 0.0)` guards are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod categorical;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod misclass;
pub mod moments;
pub mod simkit;

pub use categorical::{
    encode_dummy, validate_dataset, CategoricalSpec, CategoryMatrix, DesignBundle, ObservedDataset,
    ValidationIssue, ValidationReport,
};
pub use diagnostics::{bias_report, pi_star, variance_report, BiasReport, VarianceReport};
pub use error::{Error, Result};
pub use estimators::{fit_corrected, ols_fit, CorrectedFit, Corrector, NaiveFit};
pub use misclass::{
    estimate_marginal, posterior_from, scenario_defined, scenario_theta, Distortion, MarginalDist,
    MarginalEstimate, MisclassMatrix, MisclassModel, PosteriorMatrix,
};
pub use moments::{build_moment_blocks, MomentBlocks};

pub use nalgebra::{DMatrix, DVector};
