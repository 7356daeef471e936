//! Theoretical covariance blocks of the dummy-coded covariates and the
//! slope-correction transform built from them.
//!
//! For one covariate with observed marginal `q`:
//!
//! * `Var(W_l) = q_l − q_l²`
//! * `Cov(W_l, W_m) = −q_l q_m` for `l ≠ m`
//! * `Cov(W_lw, X_lx) = (θ[lx][lw] − q_lw) p_lx`
//!
//! Rows of `Σ_WX` are indexed by the observed level and columns by the true
//! level, so that `Cov(W, Y) = Σ_WX β`. Covariates are independent, so all
//! matrices are block diagonal.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::categorical::CategoricalSpec;
use crate::error::{Error, Result};
use crate::linalg::{guarded_inverse, reciprocal_condition, RCOND_FLOOR};
use crate::misclass::{MarginalDist, MisclassMatrix, MisclassModel};

fn observed_mass(theta: &MisclassMatrix, p: &MarginalDist, l: usize) -> f64 {
    (0..theta.levels()).map(|x| p.prob(x) * theta.prob(x, l)).sum()
}

pub fn var_w(theta: &MisclassMatrix, p: &MarginalDist, l: usize) -> f64 {
    let q = observed_mass(theta, p, l);
    q - q * q
}

pub fn cov_w_pair(theta: &MisclassMatrix, p: &MarginalDist, l: usize, m: usize) -> Result<f64> {
    if l == m {
        return Err(Error::SameLevel(l));
    }
    Ok(-observed_mass(theta, p, l) * observed_mass(theta, p, m))
}

/// `Cov(W_{l_w}, X_{l_x})`.
pub fn cov_wx_entry(theta: &MisclassMatrix, p: &MarginalDist, l_w: usize, l_x: usize) -> f64 {
    (theta.prob(l_x, l_w) - observed_mass(theta, p, l_w)) * p.prob(l_x)
}

/// Conditioning of one covariate's blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockConditioning {
    pub covariate: usize,
    /// Reciprocal condition of `Σ_W` for this covariate.
    pub sigma_w_rcond: f64,
    /// Reciprocal condition of `Σ_W⁻¹Σ_WX` for this covariate.
    pub attenuation_rcond: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentBlocks {
    pub sigma_w: DMatrix<f64>,
    pub sigma_wx: DMatrix<f64>,
    /// Covariance of the true dummies (the `θ = I` case of `sigma_w`).
    pub sigma_x: DMatrix<f64>,
    /// `Σ_W⁻¹Σ_WX`, the map taking true slopes to their naive limits.
    pub attenuation: DMatrix<f64>,
    /// `(Σ_W⁻¹Σ_WX)⁻¹`.
    pub correction: DMatrix<f64>,
    /// `diag(1, correction)`.
    pub z_star: DMatrix<f64>,
    pub conditioning: Vec<BlockConditioning>,
}

impl MomentBlocks {
    pub fn slope_count(&self) -> usize {
        self.correction.nrows()
    }

    pub fn min_rcond(&self) -> f64 {
        self.conditioning
            .iter()
            .flat_map(|c| [c.sigma_w_rcond, c.attenuation_rcond])
            .fold(f64::INFINITY, f64::min)
    }
}

fn covariate_blocks(
    theta: &MisclassMatrix,
    p: &MarginalDist,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let d = theta.levels() - 1;
    let mut sw = DMatrix::zeros(d, d);
    let mut swx = DMatrix::zeros(d, d);
    let mut sx = DMatrix::zeros(d, d);
    for l in 0..d {
        for m in 0..d {
            sw[(l, m)] = if l == m {
                var_w(theta, p, l)
            } else {
                cov_w_pair(theta, p, l, m).expect("distinct levels")
            };
            swx[(l, m)] = cov_wx_entry(theta, p, l, m);
            sx[(l, m)] = if l == m {
                p.prob(l) * (1.0 - p.prob(l))
            } else {
                -p.prob(l) * p.prob(m)
            };
        }
    }
    (sw, swx, sx)
}

pub fn build_moment_blocks(spec: &CategoricalSpec, model: &MisclassModel) -> Result<MomentBlocks> {
    model.check_spec(spec)?;
    let size = spec.slope_count();
    let mut sigma_w = DMatrix::zeros(size, size);
    let mut sigma_wx = DMatrix::zeros(size, size);
    let mut sigma_x = DMatrix::zeros(size, size);
    let mut attenuation = DMatrix::zeros(size, size);
    let mut correction = DMatrix::zeros(size, size);
    let mut conditioning = Vec::with_capacity(spec.covariates());

    for (k, (theta, p)) in model.thetas().iter().zip(model.marginals()).enumerate() {
        let (sw, swx, sx) = covariate_blocks(theta, p);
        let sigma_w_rcond = reciprocal_condition(&sw);
        if !(sigma_w_rcond >= RCOND_FLOOR) {
            return Err(Error::NonIdentifiable {
                covariate: k,
                rcond: sigma_w_rcond,
            });
        }
        let att = sw
            .clone()
            .lu()
            .solve(&swx)
            .ok_or(Error::NonIdentifiable {
                covariate: k,
                rcond: sigma_w_rcond,
            })?;
        let corr = guarded_inverse(&att).map_err(|rcond| Error::NonIdentifiable {
            covariate: k,
            rcond,
        })?;
        conditioning.push(BlockConditioning {
            covariate: k,
            sigma_w_rcond,
            attenuation_rcond: reciprocal_condition(&att),
        });

        let off = spec.offset(k);
        let d = sw.nrows();
        sigma_w.view_mut((off, off), (d, d)).copy_from(&sw);
        sigma_wx.view_mut((off, off), (d, d)).copy_from(&swx);
        sigma_x.view_mut((off, off), (d, d)).copy_from(&sx);
        attenuation.view_mut((off, off), (d, d)).copy_from(&att);
        correction.view_mut((off, off), (d, d)).copy_from(&corr);
    }

    let mut z_star = DMatrix::zeros(size + 1, size + 1);
    z_star[(0, 0)] = 1.0;
    z_star.view_mut((1, 1), (size, size)).copy_from(&correction);

    Ok(MomentBlocks {
        sigma_w,
        sigma_wx,
        sigma_x,
        attenuation,
        correction,
        z_star,
        conditioning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::misclass::{scenario_theta, Distortion};
    use approx::assert_abs_diff_eq;

    fn preset(level: Distortion, l: usize) -> MisclassMatrix {
        scenario_theta(level, l).unwrap()
    }

    #[test]
    fn var_w_examples() {
        let u2 = MarginalDist::uniform(2);
        assert_abs_diff_eq!(var_w(&preset(Distortion::Low, 2), &u2, 0), 0.525 * 0.475, epsilon = 1e-15);
        assert_abs_diff_eq!(var_w(&preset(Distortion::Low, 2), &u2, 0), 0.249375, epsilon = 1e-12);
        let certain = MisclassMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(var_w(&certain, &u2, 0), 0.0);
        let q = 0.95 / 3.0;
        let v = var_w(&preset(Distortion::Medium, 3), &MarginalDist::uniform(3), 0);
        assert_abs_diff_eq!(v, q * (1.0 - q), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.216389, epsilon = 1e-6);
    }

    #[test]
    fn cov_w_examples() {
        let u3 = MarginalDist::uniform(3);
        let c = cov_w_pair(&preset(Distortion::Medium, 3), &u3, 0, 1).unwrap();
        assert_abs_diff_eq!(c, -(0.95 / 3.0) * (1.1 / 3.0), epsilon = 1e-15);
        assert_abs_diff_eq!(c, -0.116111, epsilon = 1e-6);

        let never = MisclassMatrix::from_rows(&[
            vec![0.5, 0.5, 0.0],
            vec![0.5, 0.5, 0.0],
            vec![0.2, 0.8, 0.0],
        ])
        .unwrap();
        assert_eq!(cov_w_pair(&never, &u3, 2, 0).unwrap(), 0.0);

        let c = cov_w_pair(&preset(Distortion::High, 4), &MarginalDist::uniform(4), 0, 1).unwrap();
        assert_abs_diff_eq!(c, -0.2375 * 0.2625, epsilon = 1e-15);
        assert_abs_diff_eq!(c, -0.062344, epsilon = 1e-6);

        assert_eq!(cov_w_pair(&never, &u3, 1, 1), Err(Error::SameLevel(1)));
    }

    #[test]
    fn cov_wx_examples() {
        let u2 = MarginalDist::uniform(2);
        assert_abs_diff_eq!(cov_wx_entry(&preset(Distortion::Low, 2), &u2, 0, 0), 0.1875, epsilon = 1e-15);
        assert_abs_diff_eq!(cov_wx_entry(&MisclassMatrix::identity(2), &u2, 0, 0), 0.25, epsilon = 1e-15);
        let c = cov_wx_entry(&preset(Distortion::Medium, 3), &MarginalDist::uniform(3), 0, 1);
        assert_abs_diff_eq!(c, (0.15 - 0.95 / 3.0) / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c, -0.055556, epsilon = 1e-6);
    }

    #[test]
    fn identity_theta_gives_identity_correction() {
        let spec = CategoricalSpec::new(vec![3, 4]).unwrap();
        let blocks = build_moment_blocks(&spec, &MisclassModel::identity(&spec)).unwrap();
        let eye = DMatrix::<f64>::identity(5, 5);
        assert_abs_diff_eq!(blocks.correction, eye, epsilon = 1e-12);
        assert_abs_diff_eq!(blocks.sigma_w, blocks.sigma_wx, epsilon = 1e-12);
        assert_abs_diff_eq!(blocks.sigma_w, blocks.sigma_x, epsilon = 1e-12);
    }

    #[test]
    fn binary_low_correction_scalar() {
        let spec = CategoricalSpec::uniform(1, 2).unwrap();
        let model = MisclassModel::new(vec![preset(Distortion::Low, 2)], vec![MarginalDist::uniform(2)]).unwrap();
        let blocks = build_moment_blocks(&spec, &model).unwrap();
        assert_abs_diff_eq!(blocks.correction[(0, 0)], 1.33, epsilon = 1e-12);
        assert_eq!(blocks.z_star.shape(), (2, 2));
        assert_eq!(blocks.z_star[(0, 0)], 1.0);
    }

    #[test]
    fn uninformative_theta_is_not_identifiable() {
        let spec = CategoricalSpec::uniform(1, 3).unwrap();
        let flat = MisclassMatrix::from_rows(&[
            vec![0.2, 0.3, 0.5],
            vec![0.2, 0.3, 0.5],
            vec![0.2, 0.3, 0.5],
        ])
        .unwrap();
        let model = MisclassModel::new(vec![flat], vec![MarginalDist::uniform(3)]).unwrap();
        assert!(matches!(
            build_moment_blocks(&spec, &model),
            Err(Error::NonIdentifiable { covariate: 0, .. })
        ));
    }

    #[test]
    fn blocks_are_block_diagonal() {
        let spec = CategoricalSpec::new(vec![2, 3, 4]).unwrap();
        let model = MisclassModel::scenario(
            Distortion::Medium,
            &spec,
            spec.levels().iter().map(|&l| MarginalDist::uniform(l)).collect(),
        )
        .unwrap();
        let b = build_moment_blocks(&spec, &model).unwrap();
        for i in 0..spec.slope_count() {
            for j in 0..spec.slope_count() {
                let (ki, _) = spec.locate_column(i).unwrap();
                let (kj, _) = spec.locate_column(j).unwrap();
                if ki != kj {
                    assert_eq!(b.sigma_w[(i, j)], 0.0);
                    assert_eq!(b.sigma_wx[(i, j)], 0.0);
                    assert_eq!(b.correction[(i, j)], 0.0);
                }
            }
        }
        assert_abs_diff_eq!(b.sigma_w, b.sigma_w.transpose(), epsilon = 0.0);
    }
}
