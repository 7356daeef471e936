//! Theoretical versus Monte Carlo variance of the corrected intercept.

use rayon::prelude::*;

use crate::diagnostics::variance_report;
use crate::error::Result;
use crate::simkit::engine::{mean_and_mcse, Simulation};

/// Error variance fed to the theoretical formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaSource {
    /// Residual estimate `σ̂²_W` of each replicate's naive fit.
    PlugIn,
    /// The simulation's `σ²`.
    Known,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterceptVarianceRow {
    pub sigma: f64,
    pub n: usize,
    /// Sample variance of `β̂₀C` over replicates.
    pub empirical_full: f64,
    /// Sample variance of `γ̂₀` over replicates.
    pub empirical_none: f64,
    /// Replicate mean of the formula value.
    pub theoretical: f64,
    /// `(empirical_full − theoretical) / empirical_full`.
    pub relative_gap: f64,
    pub replicates: usize,
    pub failures: usize,
}

fn sample_variance(values: &[f64]) -> f64 {
    let (_, mcse) = mean_and_mcse(values);
    mcse * mcse * values.len() as f64
}

impl Simulation {
    /// One row per (σ, n): empirical variance of the intercept estimates
    /// across replicates next to the average theoretical variance.
    pub fn intercept_variance_study(&self, source: SigmaSource) -> Result<Vec<InterceptVarianceRow>> {
        let n_grid = self.config().n_grid.clone();
        let n_count = n_grid.len();
        let m = self.spec().param_count();
        let per_replicate = (0..self.config().replicates as u64)
            .into_par_iter()
            .map(|r| -> Result<Vec<Option<[f64; 3]>>> {
                let draw = self.draw(r)?;
                let ys = (0..self.sigmas().len())
                    .map(|s| self.response(&draw, s, r))
                    .collect::<Result<Vec<_>>>()?;
                let mut cells = vec![None; self.sigmas().len() * n_count];
                for (ni, &n) in n_grid.iter().enumerate() {
                    let Some((w_star, ls)) = self.factor_prefix(&draw, n) else {
                        continue;
                    };
                    let pi_n = draw.pi_rows.rows(0, n).into_owned();
                    for (s, y) in ys.iter().enumerate() {
                        let est = self.estimates_prefix(&ls, y, &pi_n, n)?;
                        let sigma2 = match source {
                            SigmaSource::Known => self.sigmas()[s].powi(2),
                            SigmaSource::PlugIn => {
                                let y_n = y.rows(0, n);
                                (y_n - &w_star * &est.none).norm_squared() / (n - m) as f64
                            }
                        };
                        let report = variance_report(&w_star, self.corrector().blocks(), &pi_n, sigma2)?;
                        cells[s * n_count + ni] = Some([est.full[0], est.none[0], report.var_beta0_c]);
                    }
                }
                Ok(cells)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut rows = Vec::with_capacity(self.sigmas().len() * n_count);
        for (s, &sigma) in self.sigmas().iter().enumerate() {
            for (ni, &n) in n_grid.iter().enumerate() {
                let idx = s * n_count + ni;
                let ok: Vec<[f64; 3]> = per_replicate.iter().filter_map(|r| r[idx]).collect();
                let column = |j: usize| ok.iter().map(|v| v[j]).collect::<Vec<_>>();
                let empirical_full = sample_variance(&column(0));
                let empirical_none = sample_variance(&column(1));
                let (theoretical, _) = mean_and_mcse(&column(2));
                rows.push(InterceptVarianceRow {
                    sigma,
                    n,
                    empirical_full,
                    empirical_none,
                    theoretical,
                    relative_gap: (empirical_full - theoretical) / empirical_full,
                    replicates: ok.len(),
                    failures: per_replicate.len() - ok.len(),
                });
            }
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::misclass::Distortion;
    use crate::simkit::config::{LevelsMode, ScenarioConfig};

    #[test]
    fn rows_cover_grid_and_are_positive() {
        let mut c = ScenarioConfig::study(Distortion::Low, 2, LevelsMode::Fixed(3));
        c.n_grid = vec![50, 150];
        c.sigmas = vec![0.1, 1.0];
        c.replicates = 20;
        let rows = Simulation::new(c)
            .unwrap()
            .intercept_variance_study(SigmaSource::Known)
            .unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert!(r.empirical_full > 0.0 && r.theoretical > 0.0 && r.empirical_none > 0.0);
            assert_eq!(r.replicates, 20);
        }
    }

    #[test]
    fn identity_theta_theory_matches_naive_intercept_formula() {
        let mut c = ScenarioConfig::study(Distortion::Low, 1, LevelsMode::Fixed(2));
        c.identity_theta = true;
        c.n_grid = vec![100];
        c.sigmas = vec![0.5];
        c.replicates = 400;
        let rows = Simulation::new(c)
            .unwrap()
            .intercept_variance_study(SigmaSource::Known)
            .unwrap();
        // with perfect classification both estimates are γ̂₀
        let r = &rows[0];
        assert!((r.empirical_full - r.empirical_none).abs() < 1e-12 * r.empirical_none);
        assert!(rows[0].relative_gap.abs() < 0.25);
    }
}
