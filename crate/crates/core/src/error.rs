use thiserror::Error;

use crate::misclass::Distortion;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("category {value} at row {row}, covariate {covariate} is outside 0..{levels}")]
    OutOfRangeCategory {
        row: usize,
        covariate: usize,
        value: i64,
        levels: usize,
    },

    #[error("invalid categorical spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid probability input: {0}")]
    InvalidProbability(String),

    #[error("observed category {level} of covariate {covariate} has zero probability mass")]
    ZeroObservedMass { covariate: usize, level: usize },

    #[error("misclassification matrix is ill-conditioned (reciprocal condition {rcond:e})")]
    IllConditionedTheta { rcond: f64 },

    #[error("no {level} distortion table is defined for {levels} levels")]
    UndefinedScenario { level: Distortion, levels: usize },

    #[error("levels {0} and {0} coincide; use var_w for the diagonal")]
    SameLevel(usize),

    #[error("correction is not identifiable for covariate {covariate} (reciprocal condition {rcond:e})")]
    NonIdentifiable { covariate: usize, rcond: f64 },

    #[error("design is rank deficient at column {column}{}", describe_column(*.covariate, *.level))]
    RankDeficient {
        column: usize,
        covariate: Option<usize>,
        level: Option<usize>,
    },

    #[error("{rows} rows cannot support {params} parameters (need at least {params} + 1)")]
    InsufficientRows { rows: usize, params: usize },

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

fn describe_column(covariate: Option<usize>, level: Option<usize>) -> String {
    match (covariate, level) {
        (Some(k), Some(l)) => format!(" (covariate {k}, level {l})"),
        _ => " (intercept)".to_string(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
