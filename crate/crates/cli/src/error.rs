//! CLI failures with stable machine-readable codes.

use miscorr_core::Error as CoreError;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("misclassification matrix missing: {0}")]
    ThetaMissing(String),
    #[error("marginal distribution missing: {0}")]
    MarginalMissing(String),
    #[error("dataset missing: {0}")]
    DataMissing(String),
    #[error("bias computation needs the true coefficients: {0}")]
    TruthRequired(String),
    #[error("cannot read config {path}: {message}")]
    ConfigRead { path: String, message: String },
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("unknown label '{label}' in column {column}")]
    UnknownLabel { column: String, label: String },
    #[error("invalid labels file {path}: {message}")]
    Labels { path: String, message: String },
    #[error("cannot write {path}: {message}")]
    Write { path: String, message: String },
    #[error("invalid thread count: {0}")]
    Threads(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => match e {
                CoreError::OutOfRangeCategory { .. } => "CATEGORY_OUT_OF_RANGE",
                CoreError::InvalidSpec(_) => "INVALID_SPEC",
                CoreError::DimensionMismatch(_) => "DIMENSION_MISMATCH",
                CoreError::InvalidProbability(_) => "INVALID_PROBABILITY",
                CoreError::ZeroObservedMass { .. } => "ZERO_OBSERVED_MASS",
                CoreError::IllConditionedTheta { .. } => "ILL_CONDITIONED_THETA",
                CoreError::UndefinedScenario { .. } => "UNDEFINED_SCENARIO",
                CoreError::SameLevel(_) => "SAME_LEVEL",
                CoreError::NonIdentifiable { .. } => "NON_IDENTIFIABLE",
                CoreError::RankDeficient { .. } => "RANK_DEFICIENT",
                CoreError::InsufficientRows { .. } => "INSUFFICIENT_ROWS",
                CoreError::InvalidConfig(_) => "INVALID_SCENARIO_CONFIG",
            },
            CliError::ThetaMissing(_) => "THETA_MISSING",
            CliError::MarginalMissing(_) => "P_MISSING",
            CliError::DataMissing(_) => "DATA_MISSING",
            CliError::TruthRequired(_) => "TRUTH_REQUIRED",
            CliError::ConfigRead { .. } => "CONFIG_READ",
            CliError::ConfigInvalid(_) => "CONFIG_INVALID",
            CliError::Parse { .. } => "PARSE_ERROR",
            CliError::UnknownLabel { .. } => "UNKNOWN_LABEL",
            CliError::Labels { .. } => "LABELS_INVALID",
            CliError::Write { .. } => "WRITE_FAILED",
            CliError::Threads(_) => "THREADS_INVALID",
        }
    }

    /// 3 for numerical failures, 1 for output failures, 2 for everything
    /// the caller can fix in the inputs.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(
                CoreError::NonIdentifiable { .. }
                | CoreError::RankDeficient { .. }
                | CoreError::IllConditionedTheta { .. },
            ) => 3,
            CliError::Write { .. } => 1,
            _ => 2,
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Payload<'a> {
            code: &'a str,
            exit_code: u8,
            message: String,
        }
        serde_json::to_string(&Payload {
            code: self.code(),
            exit_code: self.exit_code(),
            message: self.to_string(),
        })
        .expect("error payload serializes")
    }
}
