//! JSON run configuration. Every field has a default except input paths;
//! relative paths are resolved against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use miscorr_core::simkit::{LevelsMode, MarginalMode, ScenarioConfig};
use miscorr_core::Distortion;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::resolve;

pub const THREADS_ENV: &str = "MISCORR_THREADS";

/// Loads a config of type `T`, or its defaults when no path is given.
/// Returns the directory relative paths resolve against.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<(T, PathBuf)> {
    let Some(path) = path else {
        return Ok((T::default(), PathBuf::from(".")));
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::ConfigRead {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let cfg = serde_json::from_str(&text).map_err(|e| CliError::ConfigRead {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
    Ok((cfg, base))
}

/// A fixed level count or `"random"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelsSetting {
    Fixed(usize),
    Named(RandomTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomTag {
    Random,
}

impl LevelsSetting {
    pub fn mode(self) -> LevelsMode {
        match self {
            LevelsSetting::Fixed(l) => LevelsMode::Fixed(l),
            LevelsSetting::Named(RandomTag::Random) => LevelsMode::Random,
        }
    }

    pub fn parse(s: &str) -> CliResult<Self> {
        if s.eq_ignore_ascii_case("random") {
            return Ok(LevelsSetting::Named(RandomTag::Random));
        }
        s.parse()
            .map(LevelsSetting::Fixed)
            .map_err(|_| CliError::ConfigInvalid(format!("levels must be an integer or 'random', got '{s}'")))
    }
}

/// `"uniform"` or one probability vector per covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MarginalsSetting {
    Named(UniformTag),
    Custom(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UniformTag {
    Uniform,
}

impl MarginalsSetting {
    fn mode(&self) -> MarginalMode {
        match self {
            MarginalsSetting::Named(UniformTag::Uniform) => MarginalMode::Uniform,
            MarginalsSetting::Custom(ps) => MarginalMode::Custom(ps.clone()),
        }
    }
}

/// One value or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

pub fn study_n_grid() -> Vec<usize> {
    (0..19).map(|i| 50 + 25 * i).collect()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Data, misclassification and marginal inputs shared by `fit` and
/// `diagnose`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputConfig {
    pub data: Option<PathBuf>,
    /// One CSV matrix per covariate, in column order.
    pub theta: Vec<PathBuf>,
    /// One CSV vector per covariate; ignored with `estimate_p`.
    pub p: Vec<PathBuf>,
    pub labels: Option<PathBuf>,
    pub estimate_p: bool,
}

impl InputConfig {
    pub fn resolve_paths(&mut self, base: &Path) {
        self.data = self.data.as_ref().map(|p| resolve(base, p));
        self.labels = self.labels.as_ref().map(|p| resolve(base, p));
        self.theta = self.theta.iter().map(|p| resolve(base, p)).collect();
        self.p = self.p.iter().map(|p| resolve(base, p)).collect();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    #[serde(flatten)]
    pub input: InputConfig,
    pub out: PathBuf,
    /// Known error standard deviation for the variance column; the residual
    /// estimate is used when absent.
    pub sigma: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            input: InputConfig::default(),
            out: default_out(),
            sigma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub distortion: OneOrMany<Distortion>,
    pub covariates: OneOrMany<usize>,
    pub levels: LevelsSetting,
    pub n_grid: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub marginals: MarginalsSetting,
    pub n_max: usize,
    pub identity_theta: bool,
    pub dump_data: bool,
    pub out: PathBuf,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            distortion: OneOrMany::Many(Distortion::ALL.to_vec()),
            covariates: OneOrMany::Many(vec![1, 3, 10, 30, 50]),
            levels: LevelsSetting::Named(RandomTag::Random),
            n_grid: study_n_grid(),
            sigmas: vec![0.1, 0.2, 0.5, 1.0],
            replicates: 300,
            seed: 0,
            marginals: MarginalsSetting::Named(UniformTag::Uniform),
            n_max: 500,
            identity_theta: false,
            dump_data: false,
            out: default_out(),
        }
    }
}

impl SimulateConfig {
    /// One scenario per (distortion, covariate count), in config order.
    pub fn scenarios(&self) -> Vec<ScenarioConfig> {
        let mut out = Vec::new();
        for d in self.distortion.to_vec() {
            for k in self.covariates.to_vec() {
                out.push(ScenarioConfig {
                    distortion: d,
                    covariates: k,
                    levels: self.levels.mode(),
                    n_grid: self.n_grid.clone(),
                    sigmas: self.sigmas.clone(),
                    replicates: self.replicates,
                    master_seed: self.seed,
                    marginals: self.marginals.mode(),
                    n_max: self.n_max,
                    identity_theta: self.identity_theta,
                });
            }
        }
        out
    }
}

/// Which error variance the theoretical intercept variance uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaSourceSetting {
    Plugin,
    Known,
}

/// Theoretical against empirical intercept variance study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InterceptStudyConfig {
    pub distortion: Distortion,
    pub covariates: usize,
    pub levels: LevelsSetting,
    pub n_grid: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub marginals: MarginalsSetting,
    pub n_max: usize,
    pub sigma_source: SigmaSourceSetting,
}

impl Default for InterceptStudyConfig {
    fn default() -> Self {
        Self {
            distortion: Distortion::Low,
            covariates: 3,
            levels: LevelsSetting::Fixed(3),
            n_grid: study_n_grid(),
            sigmas: vec![0.1],
            replicates: 300,
            seed: 0,
            marginals: MarginalsSetting::Named(UniformTag::Uniform),
            n_max: 500,
            sigma_source: SigmaSourceSetting::Plugin,
        }
    }
}

impl InterceptStudyConfig {
    pub fn scenario(&self) -> ScenarioConfig {
        ScenarioConfig {
            distortion: self.distortion,
            covariates: self.covariates,
            levels: self.levels.mode(),
            n_grid: self.n_grid.clone(),
            sigmas: self.sigmas.clone(),
            replicates: self.replicates,
            master_seed: self.seed,
            marginals: self.marginals.mode(),
            n_max: self.n_max,
            identity_theta: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnoseConfig {
    #[serde(flatten)]
    pub input: InputConfig,
    /// True `(β₀, β)` as a CSV vector; required for the bias table.
    pub truth: Option<PathBuf>,
    /// Known error standard deviation; the residual estimate is used when
    /// absent.
    pub sigma: Option<f64>,
    pub out: PathBuf,
    pub intercept_study: InterceptStudyConfig,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        Self {
            input: InputConfig::default(),
            truth: None,
            sigma: None,
            out: default_out(),
            intercept_study: InterceptStudyConfig::default(),
        }
    }
}

/// Worker count: flag first, then the environment, else rayon's default.
pub fn thread_count(flag: Option<usize>) -> CliResult<Option<usize>> {
    if let Some(n) = flag {
        return if n == 0 {
            Err(CliError::Threads("--threads must be at least 1".into()))
        } else {
            Ok(Some(n))
        };
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Threads(format!("{THREADS_ENV}='{v}' is not a positive integer"))),
        },
        _ => Ok(None),
    }
}
