//! Data generation for the simulation study.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::categorical::{CategoricalSpec, CategoryMatrix};
use crate::error::{Error, Result};
use crate::misclass::{MarginalDist, MisclassMatrix, PosteriorMatrix};

/// True coefficients `(β₀, β)` used to generate responses.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSpec {
    beta_star: DVector<f64>,
}

impl TruthSpec {
    /// Any coefficient vector with nonzero entries (EQP divides by them).
    pub fn new(beta_star: DVector<f64>) -> Result<Self> {
        if beta_star.is_empty() {
            return Err(Error::InvalidConfig("truth needs at least an intercept".into()));
        }
        if let Some(l) = beta_star.iter().position(|b| *b == 0.0 || !b.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "truth coefficient {l} must be finite and nonzero"
            )));
        }
        Ok(Self { beta_star })
    }

    /// `β_l = 0.5 + 0.2 l` for `l = 0..param_count`.
    pub fn linear(param_count: usize) -> Self {
        let beta_star = DVector::from_iterator(param_count, (0..param_count).map(|l| 0.5 + 0.2 * l as f64));
        Self { beta_star }
    }

    pub fn beta_star(&self) -> &DVector<f64> {
        &self.beta_star
    }

    pub fn intercept(&self) -> f64 {
        self.beta_star[0]
    }

    pub fn slopes(&self) -> DVector<f64> {
        self.beta_star.rows(1, self.beta_star.len() - 1).into_owned()
    }

    pub fn param_count(&self) -> usize {
        self.beta_star.len()
    }
}

/// Inverse-CDF draw from a probability vector. Never returns a zero-mass
/// level, even when rounding leaves the cumulative sum short of one.
pub fn draw_category<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (l, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum && p > 0.0 {
            return l;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// `n` i.i.d. rows of true categories, row-major draw order.
pub fn simulate_x<R: Rng + ?Sized>(
    spec: &CategoricalSpec,
    ps: &[MarginalDist],
    n: usize,
    rng: &mut R,
) -> Result<CategoryMatrix> {
    if ps.len() != spec.covariates() {
        return Err(Error::DimensionMismatch(format!(
            "{} marginals for {} covariates",
            ps.len(),
            spec.covariates()
        )));
    }
    for (k, p) in ps.iter().enumerate() {
        if p.levels() != spec.levels_of(k) {
            return Err(Error::DimensionMismatch(format!(
                "marginal {k} has {} levels, spec has {}",
                p.levels(),
                spec.levels_of(k)
            )));
        }
    }
    let k = spec.covariates();
    let mut data = Vec::with_capacity(n * k);
    for _ in 0..n {
        for p in ps {
            data.push(draw_category(p.probs(), rng) as i64);
        }
    }
    CategoryMatrix::new(n, k, data)
}

/// Observed categories: each entry drawn from row `θ[x]` of its covariate.
pub fn simulate_w<R: Rng + ?Sized>(
    x: &CategoryMatrix,
    thetas: &[MisclassMatrix],
    rng: &mut R,
) -> Result<CategoryMatrix> {
    if thetas.len() != x.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} misclassification matrices for {} covariates",
            thetas.len(),
            x.ncols()
        )));
    }
    let rows: Vec<Vec<Vec<f64>>> = thetas
        .iter()
        .map(|t| (0..t.levels()).map(|l| t.row(l)).collect())
        .collect();
    let mut data = Vec::with_capacity(x.nrows() * x.ncols());
    for i in 0..x.nrows() {
        for (k, &v) in x.row(i).iter().enumerate() {
            let levels = thetas[k].levels();
            if v < 0 || v as usize >= levels {
                return Err(Error::OutOfRangeCategory {
                    row: i,
                    covariate: k,
                    value: v,
                    levels,
                });
            }
            data.push(draw_category(&rows[k][v as usize], rng) as i64);
        }
    }
    CategoryMatrix::new(x.nrows(), x.ncols(), data)
}

/// True categories redrawn from the posterior given fixed observed ones.
pub fn simulate_x_given_w<R: Rng + ?Sized>(
    w: &CategoryMatrix,
    posteriors: &[PosteriorMatrix],
    rng: &mut R,
) -> Result<CategoryMatrix> {
    if posteriors.len() != w.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} posterior matrices for {} covariates",
            posteriors.len(),
            w.ncols()
        )));
    }
    let rows: Vec<Vec<Vec<f64>>> = posteriors
        .iter()
        .map(|p| {
            (0..p.levels())
                .map(|obs| p.matrix().row(obs).iter().copied().collect())
                .collect()
        })
        .collect();
    let mut data = Vec::with_capacity(w.nrows() * w.ncols());
    for i in 0..w.nrows() {
        for (k, &v) in w.row(i).iter().enumerate() {
            let levels = posteriors[k].levels();
            if v < 0 || v as usize >= levels {
                return Err(Error::OutOfRangeCategory {
                    row: i,
                    covariate: k,
                    value: v,
                    levels,
                });
            }
            data.push(draw_category(&rows[k][v as usize], rng) as i64);
        }
    }
    CategoryMatrix::new(w.nrows(), w.ncols(), data)
}

/// `y_i = β₀ + x_i β + σ ε_i` with standard normal `ε_i` drawn in row order.
pub fn simulate_y<R: Rng + ?Sized>(
    x_design: &DMatrix<f64>,
    truth: &TruthSpec,
    sigma: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")));
    }
    if x_design.ncols() + 1 != truth.param_count() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} slope columns, truth has {} coefficients",
            x_design.ncols(),
            truth.param_count()
        )));
    }
    let mut y = x_design * truth.slopes();
    for v in y.iter_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *v += truth.intercept() + sigma * e;
    }
    Ok(y)
}

/// Per-replicate weighted squared error, `Σ_l (β_l − β̂_l)² / β_l` averaged
/// over the parameters.
pub fn eqp(beta_hat: &DVector<f64>, truth: &TruthSpec) -> f64 {
    assert_eq!(beta_hat.len(), truth.param_count(), "estimate and truth lengths differ");
    let total: f64 = beta_hat
        .iter()
        .zip(truth.beta_star().iter())
        .map(|(b_hat, b)| (b - b_hat).powi(2) / b)
        .sum();
    total / truth.param_count() as f64
}
