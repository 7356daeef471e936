//! Scenario grids.

use rand::Rng;

use crate::categorical::CategoricalSpec;
use crate::error::{Error, Result};
use crate::misclass::{scenario_defined, Distortion, MarginalDist, MisclassMatrix, MisclassModel};
use crate::simkit::streams::{stream, Purpose};

/// Level count per covariate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelsMode {
    Fixed(usize),
    /// Each covariate independently gets 2, 3 or 4 levels with equal
    /// probability, drawn once per run from the master seed.
    Random,
}

/// Distribution of the true categories.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginalMode {
    Uniform,
    /// One probability vector per covariate; lengths must match the
    /// resolved level counts.
    Custom(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub distortion: Distortion,
    pub covariates: usize,
    pub levels: LevelsMode,
    /// Ascending sample sizes; every replicate is drawn at `n_max` and each
    /// size uses a prefix of it.
    pub n_grid: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub replicates: usize,
    pub master_seed: u64,
    pub marginals: MarginalMode,
    pub n_max: usize,
    /// Replace every misclassification matrix by the identity. Debug aid:
    /// all three estimators then coincide.
    pub identity_theta: bool,
}

/// Sigmas retained under high distortion.
pub const HIGH_DISTORTION_SIGMAS: [f64; 2] = [0.1, 1.0];

impl ScenarioConfig {
    /// Full study grid: n = 50, 75, …, 500, σ ∈ {0.1, 0.2, 0.5, 1}, 300
    /// replicates, uniform marginals.
    pub fn study(distortion: Distortion, covariates: usize, levels: LevelsMode) -> Self {
        Self {
            distortion,
            covariates,
            levels,
            n_grid: (0..19).map(|i| 50 + 25 * i).collect(),
            sigmas: vec![0.1, 0.2, 0.5, 1.0],
            replicates: 300,
            master_seed: 0,
            marginals: MarginalMode::Uniform,
            n_max: 500,
            identity_theta: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.covariates == 0 {
            return Err(Error::InvalidConfig("need at least one covariate".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("need at least one replicate".into()));
        }
        if self.n_grid.is_empty() {
            return Err(Error::InvalidConfig("sample size grid is empty".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("sample size grid must be strictly ascending".into()));
        }
        if self.n_grid[0] == 0 {
            return Err(Error::InvalidConfig("sample sizes must be positive".into()));
        }
        if *self.n_grid.last().unwrap() > self.n_max {
            return Err(Error::InvalidConfig(format!(
                "largest sample size {} exceeds n_max {}",
                self.n_grid.last().unwrap(),
                self.n_max
            )));
        }
        if self.sigmas.is_empty() || self.sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidConfig("sigmas must be a nonempty list of positive values".into()));
        }
        match (self.distortion, self.levels) {
            (Distortion::High, LevelsMode::Fixed(l)) if l != 4 => {
                return Err(Error::UndefinedScenario {
                    level: Distortion::High,
                    levels: l,
                })
            }
            (d, LevelsMode::Fixed(l)) if !scenario_defined(d, l) => {
                return Err(Error::UndefinedScenario { level: d, levels: l })
            }
            _ => {}
        }
        if self.effective_sigmas().is_empty() {
            return Err(Error::InvalidConfig(
                "high distortion runs only at sigma 0.1 and 1; none requested".into(),
            ));
        }
        if let MarginalMode::Custom(ps) = &self.marginals {
            if ps.len() != self.covariates {
                return Err(Error::InvalidConfig(format!(
                    "{} marginal vectors for {} covariates",
                    ps.len(),
                    self.covariates
                )));
            }
        }
        Ok(())
    }

    /// Level counts for this run. High distortion always uses four levels.
    pub fn resolve_spec(&self) -> Result<CategoricalSpec> {
        let levels = match (self.distortion, self.levels) {
            (Distortion::High, _) => vec![4; self.covariates],
            (_, LevelsMode::Fixed(l)) => vec![l; self.covariates],
            (_, LevelsMode::Random) => {
                let mut rng = stream(self.master_seed, Purpose::Structure, 0, 0);
                (0..self.covariates).map(|_| rng.random_range(2..=4usize)).collect()
            }
        };
        CategoricalSpec::new(levels)
    }

    pub fn resolve_marginals(&self, spec: &CategoricalSpec) -> Result<Vec<MarginalDist>> {
        match &self.marginals {
            MarginalMode::Uniform => Ok(spec.levels().iter().map(|&l| MarginalDist::uniform(l)).collect()),
            MarginalMode::Custom(ps) => ps
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    if p.len() != spec.levels_of(k) {
                        return Err(Error::InvalidConfig(format!(
                            "marginal {k} has {} entries, covariate has {} levels",
                            p.len(),
                            spec.levels_of(k)
                        )));
                    }
                    MarginalDist::new(p.clone())
                })
                .collect(),
        }
    }

    pub fn build_model(&self, spec: &CategoricalSpec) -> Result<MisclassModel> {
        let marginals = self.resolve_marginals(spec)?;
        if self.identity_theta {
            let thetas = spec.levels().iter().map(|&l| MisclassMatrix::identity(l)).collect();
            MisclassModel::new(thetas, marginals)
        } else {
            MisclassModel::scenario(self.distortion, spec, marginals)
        }
    }

    /// Sigmas actually run; high distortion keeps only 0.1 and 1.
    pub fn effective_sigmas(&self) -> Vec<f64> {
        match self.distortion {
            Distortion::High => self
                .sigmas
                .iter()
                .copied()
                .filter(|s| HIGH_DISTORTION_SIGMAS.contains(s))
                .collect(),
            _ => self.sigmas.clone(),
        }
    }
}
