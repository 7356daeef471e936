//! Seeded Monte Carlo studies of the naive and corrected estimators.
//!
//! A [`Simulation`] draws each replicate at `n_max` rows and fits every
//! sample size on a prefix of it, so smaller samples are nested inside larger
//! ones. All randomness comes from counter-keyed streams; results do not
//! depend on thread count or scheduling.

pub mod config;
pub mod engine;
pub mod generate;
pub mod intercept_variance;
pub mod streams;

pub use config::{LevelsMode, MarginalMode, ScenarioConfig, HIGH_DISTORTION_SIGMAS};
pub use engine::{
    mean_and_mcse, run_grid, EqpRecord, EqpTable, Method, MethodEstimates, ReplicateDraw, ReplicateOutcome,
    Simulation,
};
pub use generate::{draw_category, eqp, simulate_w, simulate_x, simulate_x_given_w, simulate_y, TruthSpec};
pub use intercept_variance::{InterceptVarianceRow, SigmaSource};
pub use streams::{stream, Purpose, SimRng};
