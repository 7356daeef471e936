//! Replicate engine and EQP aggregation.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::categorical::{encode_dummy, CategoricalSpec, CategoryMatrix, DesignBundle};
use crate::error::{Error, Result};
use crate::estimators::Corrector;
use crate::linalg::LeastSquares;
use crate::misclass::{posterior_rows, Distortion};
use crate::simkit::config::ScenarioConfig;
use crate::simkit::generate::{eqp, simulate_w, simulate_x, simulate_y, TruthSpec};
use crate::simkit::streams::{stream, Purpose};

/// Which estimate of `(β₀, β)` is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// `(γ̂₀, γ̂)`
    None,
    /// `(γ̂₀, β̂_C)`
    Partial,
    /// `(β̂₀C, β̂_C)`
    Full,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::None, Method::Partial, Method::Full];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Partial => "partial",
            Method::Full => "full",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Method::None),
            "partial" => Ok(Method::Partial),
            "full" => Ok(Method::Full),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodEstimates {
    pub none: DVector<f64>,
    pub partial: DVector<f64>,
    pub full: DVector<f64>,
}

impl MethodEstimates {
    pub fn get(&self, method: Method) -> &DVector<f64> {
        match method {
            Method::None => &self.none,
            Method::Partial => &self.partial,
            Method::Full => &self.full,
        }
    }

    pub fn eqp(&self, truth: &TruthSpec) -> [f64; 3] {
        Method::ALL.map(|m| eqp(self.get(m), truth))
    }
}

/// Categories of one replicate at `n_max` rows plus their encodings.
#[derive(Debug, Clone)]
pub struct ReplicateDraw {
    pub x: CategoryMatrix,
    pub w: CategoryMatrix,
    pub x_design: DMatrix<f64>,
    pub w_bundle: DesignBundle,
    pub pi_rows: DMatrix<f64>,
}

/// Estimates of one replicate for every (σ, n) cell; `None` marks a
/// rank-deficient design.
#[derive(Debug, Clone)]
pub struct ReplicateOutcome {
    n_count: usize,
    cells: Vec<Option<MethodEstimates>>,
}

impl ReplicateOutcome {
    pub fn get(&self, sigma_index: usize, n_index: usize) -> Option<&MethodEstimates> {
        self.cells[sigma_index * self.n_count + n_index].as_ref()
    }
}

/// One aggregated grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EqpRecord {
    pub distortion: Distortion,
    pub covariates: usize,
    pub levels: String,
    pub n: usize,
    pub sigma: f64,
    pub method: Method,
    /// Mean over successful replicates; NaN when every replicate failed.
    pub eqp: f64,
    /// Standard deviation over successful replicates divided by √count;
    /// NaN with fewer than two.
    pub mcse: f64,
    pub replicates: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EqpTable {
    pub records: Vec<EqpRecord>,
}

impl EqpTable {
    pub fn find(&self, n: usize, sigma: f64, method: Method) -> Option<&EqpRecord> {
        self.records
            .iter()
            .find(|r| r.n == n && r.sigma == sigma && r.method == method)
    }
}

/// Mean and Monte Carlo standard error, summed in slice order.
pub fn mean_and_mcse(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    if m < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

/// A validated scenario with its model and correction precomputed.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: ScenarioConfig,
    corrector: Corrector,
    truth: TruthSpec,
    sigmas: Vec<f64>,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let spec = config.resolve_spec()?;
        let model = config.build_model(&spec)?;
        let truth = TruthSpec::linear(spec.param_count());
        let corrector = Corrector::new(spec, model)?;
        let sigmas = config.effective_sigmas();
        Ok(Self {
            config,
            corrector,
            truth,
            sigmas,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn spec(&self) -> &CategoricalSpec {
        self.corrector.spec()
    }

    pub fn corrector(&self) -> &Corrector {
        &self.corrector
    }

    pub fn truth(&self) -> &TruthSpec {
        &self.truth
    }

    /// Sigmas actually simulated.
    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// True and observed categories of replicate `r` at `n_max` rows.
    pub fn draw(&self, replicate: u64) -> Result<ReplicateDraw> {
        let model = self.corrector.model();
        // separate streams keep both draws nested when n_max changes
        let mut x_rng = stream(self.config.master_seed, Purpose::Design, replicate, 0);
        let mut w_rng = stream(self.config.master_seed, Purpose::Design, replicate, 1);
        let x = simulate_x(self.spec(), model.marginals(), self.config.n_max, &mut x_rng)?;
        let w = simulate_w(&x, model.thetas(), &mut w_rng)?;
        let x_design = encode_dummy(self.spec(), &x)?.design;
        let w_bundle = encode_dummy(self.spec(), &w)?;
        let pi_rows = posterior_rows(model.posteriors(), &w)?;
        Ok(ReplicateDraw {
            x,
            w,
            x_design,
            w_bundle,
            pi_rows,
        })
    }

    /// Responses of replicate `r` at the `sigma_index`-th sigma, `n_max` rows.
    pub fn response(&self, draw: &ReplicateDraw, sigma_index: usize, replicate: u64) -> Result<DVector<f64>> {
        let mut rng = stream(self.config.master_seed, Purpose::Noise, replicate, sigma_index as u64);
        simulate_y(&draw.x_design, &self.truth, self.sigmas[sigma_index], &mut rng)
    }

    /// Factorization of the first `n` observed rows, or `None` when they
    /// cannot support the model.
    pub(crate) fn factor_prefix(&self, draw: &ReplicateDraw, n: usize) -> Option<(DMatrix<f64>, LeastSquares)> {
        if n < self.spec().param_count() + 1 {
            return None;
        }
        let w_star = draw.w_bundle.design_star.rows(0, n).into_owned();
        let ls = LeastSquares::factor(&w_star).ok()?;
        Some((w_star, ls))
    }

    pub(crate) fn estimates_prefix(
        &self,
        ls: &LeastSquares,
        y_full: &DVector<f64>,
        pi_n: &DMatrix<f64>,
        n: usize,
    ) -> Result<MethodEstimates> {
        let y = y_full.rows(0, n).into_owned();
        let gamma_star = ls.solve(&y);
        let (beta_c, beta0_c) = self.corrector.correct(&gamma_star, &y, pi_n)?;
        let p = beta_c.len();
        let mut partial = gamma_star.clone();
        partial.rows_mut(1, p).copy_from(&beta_c);
        let mut full = partial.clone();
        full[0] = beta0_c;
        Ok(MethodEstimates {
            none: gamma_star,
            partial,
            full,
        })
    }

    /// All (σ, n) cells of one replicate. Each n-design is factored once and
    /// reused across sigmas.
    pub fn run_replicate(&self, replicate: u64) -> Result<ReplicateOutcome> {
        let draw = self.draw(replicate)?;
        let ys = (0..self.sigmas.len())
            .map(|s| self.response(&draw, s, replicate))
            .collect::<Result<Vec<_>>>()?;
        let n_count = self.config.n_grid.len();
        let mut cells = vec![None; self.sigmas.len() * n_count];
        for (ni, &n) in self.config.n_grid.iter().enumerate() {
            let Some((_, ls)) = self.factor_prefix(&draw, n) else {
                continue;
            };
            let pi_n = draw.pi_rows.rows(0, n).into_owned();
            for (s, y) in ys.iter().enumerate() {
                cells[s * n_count + ni] = Some(self.estimates_prefix(&ls, y, &pi_n, n)?);
            }
        }
        Ok(ReplicateOutcome { n_count, cells })
    }

    /// A single cell computed on its own; identical to the corresponding
    /// entry of [`Simulation::run_replicate`].
    pub fn run_cell(&self, n: usize, sigma_index: usize, replicate: u64) -> Result<Option<MethodEstimates>> {
        if n > self.config.n_max || sigma_index >= self.sigmas.len() {
            return Err(Error::InvalidConfig(format!(
                "cell (n={n}, sigma index {sigma_index}) is outside the grid"
            )));
        }
        let draw = self.draw(replicate)?;
        let y = self.response(&draw, sigma_index, replicate)?;
        let Some((_, ls)) = self.factor_prefix(&draw, n) else {
            return Ok(None);
        };
        let pi_n = draw.pi_rows.rows(0, n).into_owned();
        self.estimates_prefix(&ls, &y, &pi_n, n).map(Some)
    }

    /// EQP of every method in every cell, `[none, partial, full]`, indexed
    /// `sigma_index * |n_grid| + n_index`.
    pub fn replicate_eqp(&self, replicate: u64) -> Result<Vec<Option<[f64; 3]>>> {
        let outcome = self.run_replicate(replicate)?;
        Ok(outcome
            .cells
            .iter()
            .map(|c| c.as_ref().map(|e| e.eqp(&self.truth)))
            .collect())
    }

    /// Full factorial over sigmas × sample sizes × methods. Replicates run
    /// on the current rayon pool and are merged in replicate order.
    pub fn run_grid(&self) -> Result<EqpTable> {
        let per_replicate = (0..self.config.replicates as u64)
            .into_par_iter()
            .map(|r| self.replicate_eqp(r))
            .collect::<Result<Vec<_>>>()?;

        let n_count = self.config.n_grid.len();
        let levels = self.spec().signature();
        let mut records = Vec::with_capacity(self.sigmas.len() * n_count * 3);
        for (s, &sigma) in self.sigmas.iter().enumerate() {
            for (ni, &n) in self.config.n_grid.iter().enumerate() {
                let idx = s * n_count + ni;
                let ok: Vec<[f64; 3]> = per_replicate.iter().filter_map(|r| r[idx]).collect();
                let failures = per_replicate.len() - ok.len();
                for (mi, method) in Method::ALL.into_iter().enumerate() {
                    let values: Vec<f64> = ok.iter().map(|v| v[mi]).collect();
                    let (eqp, mcse) = mean_and_mcse(&values);
                    records.push(EqpRecord {
                        distortion: self.config.distortion,
                        covariates: self.config.covariates,
                        levels: levels.clone(),
                        n,
                        sigma,
                        method,
                        eqp,
                        mcse,
                        replicates: ok.len(),
                        failures,
                    });
                }
            }
        }
        Ok(EqpTable { records })
    }
}

/// Convenience wrapper: build the scenario and run its grid.
pub fn run_grid(config: &ScenarioConfig) -> Result<EqpTable> {
    Simulation::new(config.clone())?.run_grid()
}
