//! Naive least squares on the observed design and the two-stage correction.

use nalgebra::{DMatrix, DVector};

use crate::categorical::{encode_dummy, validate_dataset, CategoricalSpec, ObservedDataset, ValidationIssue};
use crate::error::{Error, Result};
use crate::linalg::LeastSquares;
use crate::misclass::{posterior_rows, MisclassModel};
use crate::moments::{build_moment_blocks, MomentBlocks};

/// Least-squares fit of `y` on the intercept-augmented observed design.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveFit {
    /// `(γ̂₀, γ̂)`, slopes covariate-major.
    pub gamma_star: DVector<f64>,
    /// `RSS / (n − M)`.
    pub sigma2_w: f64,
    /// `(W*ᵀW*)⁻¹`.
    pub xtx_inv: DMatrix<f64>,
    pub residuals: DVector<f64>,
}

impl NaiveFit {
    pub fn intercept(&self) -> f64 {
        self.gamma_star[0]
    }

    pub fn slopes(&self) -> DVector<f64> {
        self.gamma_star.rows(1, self.gamma_star.len() - 1).into_owned()
    }
}

pub fn ols_fit(design_star: &DMatrix<f64>, y: &DVector<f64>) -> Result<NaiveFit> {
    let (n, m) = design_star.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} responses for a design with {n} rows",
            y.len()
        )));
    }
    if n < m + 1 {
        return Err(Error::InsufficientRows { rows: n, params: m });
    }
    let ls = LeastSquares::factor(design_star).map_err(|column| Error::RankDeficient {
        column,
        covariate: None,
        level: None,
    })?;
    Ok(ols_with(&ls, design_star, y))
}

/// Fit against an existing factorization of `design_star`.
pub fn ols_with(ls: &LeastSquares, design_star: &DMatrix<f64>, y: &DVector<f64>) -> NaiveFit {
    let gamma_star = ls.solve(y);
    let residuals = y - design_star * &gamma_star;
    let df = (ls.rows() - ls.cols()) as f64;
    let sigma2_w = residuals.norm_squared() / df;
    NaiveFit {
        gamma_star,
        sigma2_w,
        xtx_inv: ls.gram_inverse(),
        residuals,
    }
}

/// `β̂_C = (Σ_W⁻¹Σ_WX)⁻¹ γ̂`; the intercept is left alone.
pub fn correct_slopes(naive: &NaiveFit, blocks: &MomentBlocks) -> Result<DVector<f64>> {
    correct_slope_vector(&naive.slopes(), blocks)
}

fn correct_slope_vector(slopes: &DVector<f64>, blocks: &MomentBlocks) -> Result<DVector<f64>> {
    if slopes.len() != blocks.slope_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} naive slopes for a {}-dimensional correction",
            slopes.len(),
            blocks.slope_count()
        )));
    }
    Ok(&blocks.correction * slopes)
}

/// `β̂₀C = mean_i (y_i − π_(i) β̂_C)`.
pub fn correct_intercept(y: &DVector<f64>, pi_rows: &DMatrix<f64>, beta_c: &DVector<f64>) -> Result<f64> {
    if pi_rows.nrows() != y.len() || pi_rows.ncols() != beta_c.len() {
        return Err(Error::DimensionMismatch(format!(
            "posterior rows {:?} incompatible with {} responses and {} slopes",
            pi_rows.shape(),
            y.len(),
            beta_c.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::InsufficientRows { rows: 0, params: 1 });
    }
    let fitted = pi_rows * beta_c;
    Ok((y - fitted).mean())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedFit {
    pub naive: NaiveFit,
    /// Corrected slopes `β̂_C`.
    pub beta_c: DVector<f64>,
    /// Corrected intercept `β̂₀C`.
    pub beta0_c: f64,
    /// `(γ̂₀, β̂_C)`: naive intercept with corrected slopes.
    pub beta_c_star: DVector<f64>,
    /// `E[dummy(X_i) | W_i]` rows used by the intercept correction.
    pub pi_rows: DMatrix<f64>,
}

impl CorrectedFit {
    /// `(β̂₀C, β̂_C)`.
    pub fn full(&self) -> DVector<f64> {
        let mut v = self.beta_c_star.clone();
        v[0] = self.beta0_c;
        v
    }
}

/// Holds the per-model quantities (moment blocks, posteriors) so that many
/// datasets can be corrected against the same misclassification model.
#[derive(Debug, Clone)]
pub struct Corrector {
    spec: CategoricalSpec,
    model: MisclassModel,
    blocks: MomentBlocks,
}

impl Corrector {
    pub fn new(spec: CategoricalSpec, model: MisclassModel) -> Result<Self> {
        let blocks = build_moment_blocks(&spec, &model)?;
        Ok(Self { spec, model, blocks })
    }

    pub fn spec(&self) -> &CategoricalSpec {
        &self.spec
    }

    pub fn model(&self) -> &MisclassModel {
        &self.model
    }

    pub fn blocks(&self) -> &MomentBlocks {
        &self.blocks
    }

    pub fn fit(&self, ds: &ObservedDataset) -> Result<CorrectedFit> {
        let design = encode_dummy(&self.spec, &ds.w)?;
        let naive = ols_fit(&design.design_star, &ds.y)
            .map_err(|e| self.locate_rank_problem(e, ds))?;
        let pi_rows = posterior_rows(self.model.posteriors(), &ds.w)?;
        self.finish(naive, &ds.y, pi_rows)
    }

    /// Correction step given a naive fit and the posterior rows of the same
    /// observations.
    pub fn finish(&self, naive: NaiveFit, y: &DVector<f64>, pi_rows: DMatrix<f64>) -> Result<CorrectedFit> {
        let (beta_c, beta0_c) = self.correct(&naive.gamma_star, y, &pi_rows)?;
        let mut beta_c_star = DVector::zeros(beta_c.len() + 1);
        beta_c_star[0] = naive.intercept();
        beta_c_star.rows_mut(1, beta_c.len()).copy_from(&beta_c);
        Ok(CorrectedFit {
            naive,
            beta_c,
            beta0_c,
            beta_c_star,
            pi_rows,
        })
    }

    /// `(β̂_C, β̂₀C)` from naive coefficients `(γ̂₀, γ̂)`. Shared by the full
    /// fit and the simulation engine so both produce identical bits.
    pub fn correct(
        &self,
        gamma_star: &DVector<f64>,
        y: &DVector<f64>,
        pi_rows: &DMatrix<f64>,
    ) -> Result<(DVector<f64>, f64)> {
        let slopes = gamma_star.rows(1, gamma_star.len().saturating_sub(1)).into_owned();
        let beta_c = correct_slope_vector(&slopes, &self.blocks)?;
        let beta0_c = correct_intercept(y, pi_rows, &beta_c)?;
        Ok((beta_c, beta0_c))
    }

    fn locate_rank_problem(&self, err: Error, ds: &ObservedDataset) -> Error {
        let Error::RankDeficient { column, .. } = err else {
            return err;
        };
        let report = validate_dataset(&self.spec, ds);
        let missing = report.issues.iter().find_map(|i| match i {
            ValidationIssue::RankRisk { covariate, level } => Some((*covariate, *level)),
            _ => None,
        });
        let (covariate, level) = match missing {
            Some((k, l)) => (Some(k), Some(l)),
            None if column > 0 => match self.spec.locate_column(column - 1) {
                Some((k, l)) => (Some(k), Some(l)),
                None => (None, None),
            },
            None => (None, None),
        };
        Error::RankDeficient {
            column,
            covariate,
            level,
        }
    }
}

/// Encode, fit naively, build the moments, correct slopes, then correct the
/// intercept.
pub fn fit_corrected(spec: &CategoricalSpec, ds: &ObservedDataset, model: &MisclassModel) -> Result<CorrectedFit> {
    Corrector::new(spec.clone(), model.clone())?.fit(ds)
}
