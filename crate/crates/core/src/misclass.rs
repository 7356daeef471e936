//! Classification-error mechanism: `θ[x][w] = P(W = w | X = x)`, the true
//! marginals `p`, and the Bayes-inverted posterior `π[w][m] = P(X = m | W = w)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::categorical::{CategoricalSpec, CategoryMatrix};
use crate::error::{Error, Result};
use crate::linalg::{reciprocal_condition, RCOND_FLOOR};

/// Rows whose sum is this close to one are accepted as-is.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Rows off by at most this much are renormalized (text rounding of tables).
pub const RENORMALIZE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distortion {
    Low,
    Medium,
    High,
}

impl Distortion {
    pub const ALL: [Distortion; 3] = [Distortion::Low, Distortion::Medium, Distortion::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Distortion::Low => "low",
            Distortion::Medium => "medium",
            Distortion::High => "high",
        }
    }
}

impl fmt::Display for Distortion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Distortion {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Distortion::Low),
            "medium" => Ok(Distortion::Medium),
            "high" => Ok(Distortion::High),
            other => Err(format!("unknown distortion scenario `{other}`")),
        }
    }
}

/// Normalizes a probability vector in place. Returns whether it had to be
/// rescaled.
fn check_probability_vector(v: &mut [f64], what: &str) -> Result<bool> {
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidProbability(format!(
            "{what} has negative or non-finite entries"
        )));
    }
    let sum: f64 = v.iter().sum();
    let off = (sum - 1.0).abs();
    if off <= SIMPLEX_TOL {
        Ok(false)
    } else if off <= RENORMALIZE_TOL {
        v.iter_mut().for_each(|x| *x /= sum);
        Ok(true)
    } else {
        Err(Error::InvalidProbability(format!(
            "{what} sums to {sum}, not 1"
        )))
    }
}

/// Row-stochastic misclassification matrix of one covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct MisclassMatrix {
    theta: DMatrix<f64>,
    renormalized: bool,
}

impl MisclassMatrix {
    pub fn new(theta: DMatrix<f64>) -> Result<Self> {
        let (r, c) = theta.shape();
        if r != c || r < 2 {
            return Err(Error::DimensionMismatch(format!(
                "misclassification matrix must be square with at least 2 levels, got {r}x{c}"
            )));
        }
        let mut theta = theta;
        let mut renormalized = false;
        for x in 0..r {
            let mut row: Vec<f64> = theta.row(x).iter().copied().collect();
            renormalized |= check_probability_vector(&mut row, &format!("row {x} of theta"))?;
            for (w, v) in row.into_iter().enumerate() {
                theta[(x, w)] = v;
            }
        }
        Ok(Self {
            theta,
            renormalized,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let l = rows.len();
        if rows.iter().any(|r| r.len() != l) {
            return Err(Error::DimensionMismatch(
                "misclassification matrix rows must all have one entry per level".into(),
            ));
        }
        Self::new(DMatrix::from_row_iterator(l, l, rows.iter().flatten().copied()))
    }

    pub fn identity(levels: usize) -> Self {
        Self {
            theta: DMatrix::identity(levels, levels),
            renormalized: false,
        }
    }

    pub fn levels(&self) -> usize {
        self.theta.nrows()
    }

    /// `P(W = observed | X = truth)`.
    pub fn prob(&self, truth: usize, observed: usize) -> f64 {
        self.theta[(truth, observed)]
    }

    pub fn row(&self, truth: usize) -> Vec<f64> {
        self.theta.row(truth).iter().copied().collect()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.theta
    }

    /// True when at least one row was rescaled to sum to one.
    pub fn was_renormalized(&self) -> bool {
        self.renormalized
    }

    /// Observed-category marginal `q[w] = Σ_x p[x] θ[x][w]`.
    pub fn observed_marginal(&self, p: &MarginalDist) -> Vec<f64> {
        let l = self.levels();
        (0..l)
            .map(|w| (0..l).map(|x| p.prob(x) * self.theta[(x, w)]).sum())
            .collect()
    }
}

/// Marginal distribution of the true category.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalDist {
    probs: Vec<f64>,
    renormalized: bool,
}

impl MarginalDist {
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::DimensionMismatch(
                "a marginal needs at least 2 levels".into(),
            ));
        }
        let renormalized = check_probability_vector(&mut probs, "marginal")?;
        Ok(Self {
            probs,
            renormalized,
        })
    }

    pub fn uniform(levels: usize) -> Self {
        Self {
            probs: vec![1.0 / levels as f64; levels],
            renormalized: false,
        }
    }

    pub fn levels(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, level: usize) -> f64 {
        self.probs[level]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn was_renormalized(&self) -> bool {
        self.renormalized
    }
}

/// `π[w][m] = P(X = m | W = w)` together with the observed marginal `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMatrix {
    pi: DMatrix<f64>,
    observed: Vec<f64>,
}

impl PosteriorMatrix {
    pub fn levels(&self) -> usize {
        self.pi.nrows()
    }

    pub fn prob(&self, observed: usize, truth: usize) -> f64 {
        self.pi[(observed, truth)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.pi
    }

    /// `q[w] = P(W = w)`.
    pub fn observed_marginal(&self) -> &[f64] {
        &self.observed
    }
}

pub fn posterior_from(theta: &MisclassMatrix, p: &MarginalDist) -> Result<PosteriorMatrix> {
    let l = theta.levels();
    if p.levels() != l {
        return Err(Error::DimensionMismatch(format!(
            "theta has {l} levels but the marginal has {}",
            p.levels()
        )));
    }
    let q = theta.observed_marginal(p);
    let mut pi = DMatrix::zeros(l, l);
    for w in 0..l {
        if !(q[w] > 0.0) {
            return Err(Error::ZeroObservedMass {
                covariate: 0,
                level: w,
            });
        }
        for m in 0..l {
            pi[(w, m)] = theta.prob(m, w) * p.prob(m) / q[w];
        }
    }
    Ok(PosteriorMatrix { pi, observed: q })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalEstimate {
    pub marginal: MarginalDist,
    /// `‖θᵀp − q̂‖₂` at the returned (projected) `p`.
    pub residual_norm: f64,
    /// Whether the unconstrained solution left the simplex.
    pub projected: bool,
}

/// Recovers `p` from observed frequencies by solving `θᵀp = q̂` and
/// projecting the solution onto the probability simplex.
pub fn estimate_marginal(theta: &MisclassMatrix, observed_freq: &[f64]) -> Result<MarginalEstimate> {
    let l = theta.levels();
    if observed_freq.len() != l {
        return Err(Error::DimensionMismatch(format!(
            "{} observed frequencies for {l} levels",
            observed_freq.len()
        )));
    }
    let mut q = observed_freq.to_vec();
    check_probability_vector(&mut q, "observed frequencies")?;

    let tt = theta.matrix().transpose();
    let rcond = reciprocal_condition(&tt);
    if !(rcond >= RCOND_FLOOR) {
        return Err(Error::IllConditionedTheta { rcond });
    }
    let qv = DVector::from_vec(q);
    let raw = tt
        .clone()
        .lu()
        .solve(&qv)
        .ok_or(Error::IllConditionedTheta { rcond })?;
    let raw: Vec<f64> = raw.iter().copied().collect();
    let projected_probs = project_to_simplex(&raw);
    let projected = raw
        .iter()
        .zip(&projected_probs)
        .any(|(a, b)| (a - b).abs() > 1e-15);
    let pv = DVector::from_column_slice(&projected_probs);
    let residual_norm = (&tt * &pv - &qv).norm();
    Ok(MarginalEstimate {
        marginal: MarginalDist {
            probs: projected_probs,
            renormalized: false,
        },
        residual_norm,
        projected,
    })
}

/// Euclidean projection onto `{p : p ≥ 0, Σp = 1}` (sort-and-threshold).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Whether `(level, levels)` has a published table.
pub fn scenario_defined(level: Distortion, levels: usize) -> bool {
    match level {
        Distortion::Low | Distortion::Medium => (2..=4).contains(&levels),
        Distortion::High => levels == 4,
    }
}

pub fn scenario_theta(level: Distortion, levels: usize) -> Result<MisclassMatrix> {
    let rows: &[&[f64]] = match (level, levels) {
        (Distortion::Low, 2) => &[&[0.9, 0.1], &[0.15, 0.85]],
        (Distortion::Low, 3) => &[&[0.85, 0.1, 0.05], &[0.1, 0.8, 0.1], &[0.05, 0.1, 0.85]],
        (Distortion::Low, 4) => &[
            &[0.825, 0.1, 0.05, 0.025],
            &[0.075, 0.8, 0.075, 0.05],
            &[0.05, 0.075, 0.8, 0.075],
            &[0.025, 0.05, 0.1, 0.825],
        ],
        (Distortion::Medium, 2) => &[&[0.7, 0.3], &[0.35, 0.65]],
        (Distortion::Medium, 3) => &[&[0.7, 0.2, 0.1], &[0.15, 0.7, 0.15], &[0.1, 0.2, 0.7]],
        (Distortion::Medium, 4) => &[
            &[0.6, 0.2, 0.125, 0.075],
            &[0.15, 0.6, 0.15, 0.1],
            &[0.1, 0.15, 0.6, 0.15],
            &[0.075, 0.125, 0.2, 0.6],
        ],
        (Distortion::High, 4) => &[
            &[0.3, 0.25, 0.25, 0.2],
            &[0.25, 0.3, 0.25, 0.2],
            &[0.2, 0.25, 0.3, 0.25],
            &[0.2, 0.25, 0.25, 0.3],
        ],
        _ => return Err(Error::UndefinedScenario { level, levels }),
    };
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    MisclassMatrix::from_rows(&rows)
}

/// Per-covariate `(θ, p, π)` triples.
#[derive(Debug, Clone, PartialEq)]
pub struct MisclassModel {
    thetas: Vec<MisclassMatrix>,
    marginals: Vec<MarginalDist>,
    posteriors: Vec<PosteriorMatrix>,
}

impl MisclassModel {
    pub fn new(thetas: Vec<MisclassMatrix>, marginals: Vec<MarginalDist>) -> Result<Self> {
        if thetas.len() != marginals.len() || thetas.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} misclassification matrices for {} marginals",
                thetas.len(),
                marginals.len()
            )));
        }
        let posteriors = thetas
            .iter()
            .zip(&marginals)
            .enumerate()
            .map(|(k, (t, p))| {
                posterior_from(t, p).map_err(|e| match e {
                    Error::ZeroObservedMass { level, .. } => Error::ZeroObservedMass {
                        covariate: k,
                        level,
                    },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            thetas,
            marginals,
            posteriors,
        })
    }

    /// Perfect classification with uniform marginals.
    pub fn identity(spec: &CategoricalSpec) -> Self {
        let thetas = spec.levels().iter().map(|&l| MisclassMatrix::identity(l)).collect();
        let marginals = spec.levels().iter().map(|&l| MarginalDist::uniform(l)).collect();
        Self::new(thetas, marginals).expect("identity model is always valid")
    }

    /// Named preset for every covariate with the given marginals.
    pub fn scenario(
        level: Distortion,
        spec: &CategoricalSpec,
        marginals: Vec<MarginalDist>,
    ) -> Result<Self> {
        let thetas = spec
            .levels()
            .iter()
            .map(|&l| scenario_theta(level, l))
            .collect::<Result<Vec<_>>>()?;
        Self::new(thetas, marginals)
    }

    pub fn covariates(&self) -> usize {
        self.thetas.len()
    }

    pub fn spec(&self) -> CategoricalSpec {
        CategoricalSpec::new(self.thetas.iter().map(MisclassMatrix::levels).collect())
            .expect("matrices have at least 2 levels")
    }

    pub fn thetas(&self) -> &[MisclassMatrix] {
        &self.thetas
    }

    pub fn marginals(&self) -> &[MarginalDist] {
        &self.marginals
    }

    pub fn posteriors(&self) -> &[PosteriorMatrix] {
        &self.posteriors
    }

    pub fn check_spec(&self, spec: &CategoricalSpec) -> Result<()> {
        let ours: Vec<usize> = self.thetas.iter().map(MisclassMatrix::levels).collect();
        if ours != spec.levels() {
            return Err(Error::DimensionMismatch(format!(
                "model levels {ours:?} do not match data levels {:?}",
                spec.levels()
            )));
        }
        Ok(())
    }
}

/// Row `i` is `E[dummy(X_i) | W_i]`: the posterior probabilities of the
/// non-reference categories, concatenated over covariates.
pub fn posterior_rows(posteriors: &[PosteriorMatrix], w: &CategoryMatrix) -> Result<DMatrix<f64>> {
    if w.ncols() != posteriors.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} covariates observed, {} posterior matrices",
            w.ncols(),
            posteriors.len()
        )));
    }
    let width: usize = posteriors.iter().map(|p| p.levels() - 1).sum();
    let mut out = DMatrix::zeros(w.nrows(), width);
    for i in 0..w.nrows() {
        let mut col = 0;
        for (k, post) in posteriors.iter().enumerate() {
            let levels = post.levels();
            let v = w.get(i, k);
            if v < 0 || v as usize >= levels {
                return Err(Error::OutOfRangeCategory {
                    row: i,
                    covariate: k,
                    value: v,
                    levels,
                });
            }
            for m in 0..levels - 1 {
                out[(i, col + m)] = post.prob(v as usize, m);
            }
            col += levels - 1;
        }
    }
    Ok(out)
}
