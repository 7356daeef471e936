//! Conditional bias and variance of the corrected estimators given the
//! observed design.
//!
//! All quantities condition on `W`. The bias needs the true coefficients, so
//! it is only available in simulations or when a truth is supplied. The
//! variances take a single error variance `sigma2`; callers plug in either a
//! known `σ²` or the residual estimate `σ̂²_W`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{guarded_inverse, symmetrize, LeastSquares};
use crate::moments::MomentBlocks;

/// `π* = (1 | π rows)`, the conditional expectation of the true
/// intercept-augmented design.
pub fn pi_star(pi_rows: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = pi_rows.shape();
    let mut out = DMatrix::zeros(n, p + 1);
    out.column_mut(0).fill(1.0);
    out.view_mut((0, 1), (n, p)).copy_from(pi_rows);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    /// Bias of `(γ̂₀, β̂_C)`.
    pub b_star: DVector<f64>,
    /// Bias of the corrected intercept `β̂₀C`.
    pub b0: f64,
    /// `E[(γ̂₀, β̂_C) | W]`.
    pub expected_beta_c_star: DVector<f64>,
}

fn rank_error(column: usize) -> Error {
    Error::RankDeficient {
        column,
        covariate: None,
        level: None,
    }
}

/// `E[(γ̂₀, β̂_C) | W] = Z (W*ᵀW*)⁻¹ W*ᵀ π* β*`.
pub fn expected_beta_c_star(
    design_star_w: &DMatrix<f64>,
    pi_star: &DMatrix<f64>,
    z_star: &DMatrix<f64>,
    beta_star_true: &DVector<f64>,
) -> Result<DVector<f64>> {
    let m = design_star_w.ncols();
    if pi_star.shape() != design_star_w.shape() || z_star.shape() != (m, m) || beta_star_true.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "design {:?}, pi* {:?}, Z {:?}, beta* {}",
            design_star_w.shape(),
            pi_star.shape(),
            z_star.shape(),
            beta_star_true.len()
        )));
    }
    let ls = LeastSquares::factor(design_star_w).map_err(rank_error)?;
    let projection = ls.solve_matrix(pi_star);
    Ok(z_star * (projection * beta_star_true))
}

/// `B = (Z (W*ᵀW*)⁻¹ W*ᵀ π* − I) β*`.
pub fn conditional_bias(
    design_star_w: &DMatrix<f64>,
    pi_star: &DMatrix<f64>,
    z_star: &DMatrix<f64>,
    beta_star_true: &DVector<f64>,
) -> Result<DVector<f64>> {
    Ok(expected_beta_c_star(design_star_w, pi_star, z_star, beta_star_true)? - beta_star_true)
}

/// `B₀ = (1/n) Σ_i π_(i) (β − E[β̂_C | W])` with slopes only.
pub fn intercept_bias(pi_rows: &DMatrix<f64>, beta_true: &DVector<f64>, expected_beta_c: &DVector<f64>) -> Result<f64> {
    if pi_rows.ncols() != beta_true.len() || beta_true.len() != expected_beta_c.len() {
        return Err(Error::DimensionMismatch(format!(
            "posterior rows have {} columns, truth {} and expectation {} entries",
            pi_rows.ncols(),
            beta_true.len(),
            expected_beta_c.len()
        )));
    }
    if pi_rows.nrows() == 0 {
        return Err(Error::InsufficientRows { rows: 0, params: 1 });
    }
    let diff = beta_true - expected_beta_c;
    Ok((pi_rows * diff).mean())
}

/// Both biases for a design, its posterior rows and the truth `(β₀, β)`.
pub fn bias_report(
    design_star_w: &DMatrix<f64>,
    pi_rows: &DMatrix<f64>,
    blocks: &MomentBlocks,
    beta_star_true: &DVector<f64>,
) -> Result<BiasReport> {
    let pis = pi_star(pi_rows);
    let expected = expected_beta_c_star(design_star_w, &pis, &blocks.z_star, beta_star_true)?;
    let p = expected.len() - 1;
    let b0 = intercept_bias(
        pi_rows,
        &beta_star_true.rows(1, p).into_owned(),
        &expected.rows(1, p).into_owned(),
    )?;
    Ok(BiasReport {
        b_star: &expected - beta_star_true,
        b0,
        expected_beta_c_star: expected,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    /// `σ² (W*ᵀW*)⁻¹`.
    pub var_gamma_star: DMatrix<f64>,
    /// `σ² Z (W*ᵀW*)⁻¹ Zᵀ`.
    pub var_beta_c_star: DMatrix<f64>,
    /// Variance of `β̂₀C`, summing the variance and covariance terms over
    /// every pair of observations.
    pub var_beta0_c: f64,
    /// The same assembly restricted to the `i = j` terms only. Kept for
    /// comparison; it drops the cross-observation covariances of `V_i γ̂`.
    pub var_beta0_c_diagonal_terms: f64,
    /// `A = Σ_i w_iᵀ (w_i − w̄)`.
    pub a_matrix: DMatrix<f64>,
    /// Rows `V_i = π_(i) (Σ_W⁻¹Σ_WX)⁻¹`.
    pub v_rows: DMatrix<f64>,
    /// `Var(γ̂) = σ² A⁻¹ [Σ_k (w_k − w̄)ᵀ(w_k − w̄)] A⁻ᵀ`.
    pub var_gamma_slopes: DMatrix<f64>,
    pub sigma2: f64,
}

fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows() as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

fn centered(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mean = column_means(m);
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        row -= mean.transpose();
    }
    out
}

/// `A = Σ_i w_iᵀ (w_i − w̄)` for the dummy matrix `W` (no intercept column).
pub fn a_matrix(design: &DMatrix<f64>) -> DMatrix<f64> {
    design.transpose() * centered(design)
}

/// Slopes from the centered normal equations, `A⁻¹ Σ_k (Y_k − Ȳ) w_kᵀ`.
/// Algebraically identical to the least-squares slopes.
pub fn centered_slopes(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let a = a_matrix(design);
    let a_inv = guarded_inverse(&a).map_err(|_| rank_error(0))?;
    let ybar = y.mean();
    let yc = y.map(|v| v - ybar);
    Ok(a_inv * (design.transpose() * yc))
}

pub fn variance_report(
    design_star_w: &DMatrix<f64>,
    blocks: &MomentBlocks,
    pi_rows: &DMatrix<f64>,
    sigma2: f64,
) -> Result<VarianceReport> {
    let (n, m) = design_star_w.shape();
    let p = m - 1;
    if blocks.slope_count() != p || pi_rows.shape() != (n, p) {
        return Err(Error::DimensionMismatch(format!(
            "design {:?}, posterior rows {:?}, correction of size {}",
            design_star_w.shape(),
            pi_rows.shape(),
            blocks.slope_count()
        )));
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidConfig(format!("error variance must be positive, got {sigma2}")));
    }

    let ls = LeastSquares::factor(design_star_w).map_err(rank_error)?;
    let gram_inv = ls.gram_inverse();
    let var_gamma_star = &gram_inv * sigma2;
    let var_beta_c_star = symmetrize(&(&blocks.z_star * &gram_inv * blocks.z_star.transpose() * sigma2));

    let w = design_star_w.columns(1, p).into_owned();
    let wc = centered(&w);
    let a = w.transpose() * &wc;
    let a_inv = guarded_inverse(&a).map_err(|_| rank_error(1))?;
    let scatter = wc.transpose() * &wc;
    let var_gamma_slopes = symmetrize(&(&a_inv * scatter * a_inv.transpose() * sigma2));

    let v_rows = pi_rows * &blocks.correction;
    // Cov(V_i γ̂, V_j γ̂) = V_i Var(γ̂) V_jᵀ
    // Cov(Y_j, V_i γ̂)   = σ² (w_j − w̄) A⁻ᵀ V_iᵀ
    let wc_a = &wc * a_inv.transpose();
    let v_var = &v_rows * &var_gamma_slopes;
    let v_sum = DVector::from_iterator(p, v_rows.column_iter().map(|c| c.sum()));
    let wc_a_sum = DVector::from_iterator(p, wc_a.column_iter().map(|c| c.sum()));

    let nf = n as f64;
    let all_pairs = {
        let vv_sum = (v_sum.transpose() * &var_gamma_slopes * &v_sum)[(0, 0)];
        // Cov(Y_i, V_j γ̂) and Cov(Y_j, V_i γ̂) both appear in the expansion
        let cross_sum = sigma2 * wc_a_sum.dot(&v_sum);
        (nf * sigma2 + vv_sum - 2.0 * cross_sum) / (nf * nf)
    };
    let diagonal_terms = {
        let vv_diag = v_var.component_mul(&v_rows).sum();
        let cross_diag = sigma2 * wc_a.component_mul(&v_rows).sum();
        (nf * sigma2 + vv_diag - 2.0 * cross_diag) / (nf * nf)
    };

    Ok(VarianceReport {
        var_gamma_star,
        var_beta_c_star,
        var_beta0_c: all_pairs,
        var_beta0_c_diagonal_terms: diagonal_terms,
        a_matrix: a,
        v_rows,
        var_gamma_slopes,
        sigma2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::categorical::{encode_dummy, CategoricalSpec, CategoryMatrix};
    use crate::misclass::{posterior_rows, scenario_theta, Distortion, MarginalDist, MisclassModel};
    use crate::moments::build_moment_blocks;
    use approx::assert_abs_diff_eq;

    fn setup(level: Option<Distortion>, levels: usize, w: &[i64]) -> (DMatrix<f64>, DMatrix<f64>, MomentBlocks) {
        let spec = CategoricalSpec::uniform(1, levels).unwrap();
        let model = match level {
            None => MisclassModel::identity(&spec),
            Some(d) => MisclassModel::new(
                vec![scenario_theta(d, levels).unwrap()],
                vec![MarginalDist::uniform(levels)],
            )
            .unwrap(),
        };
        let cats = CategoryMatrix::from_rows(&w.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap();
        let design = encode_dummy(&spec, &cats).unwrap().design_star;
        let pi = posterior_rows(model.posteriors(), &cats).unwrap();
        (design, pi, build_moment_blocks(&spec, &model).unwrap())
    }

    #[test]
    fn perfect_classification_has_no_bias() {
        let (w, pi, blocks) = setup(None, 3, &[0, 1, 2, 0, 1, 2, 2]);
        let beta = DVector::from_vec(vec![0.5, 0.7, 0.9]);
        let b = conditional_bias(&w, &pi_star(&pi), &blocks.z_star, &beta).unwrap();
        assert!(b.amax() < 1e-10);
    }

    #[test]
    fn zero_truth_has_no_bias() {
        let (w, pi, blocks) = setup(Some(Distortion::Low), 2, &[0, 1, 1, 0, 1]);
        let b = conditional_bias(&w, &pi_star(&pi), &blocks.z_star, &DVector::zeros(2)).unwrap();
        assert_eq!(b, DVector::zeros(2));
    }

    #[test]
    fn intercept_bias_arithmetic() {
        let pi = DMatrix::from_row_slice(1, 1, &[0.5]);
        let b0 = intercept_bias(&pi, &DVector::from_vec(vec![1.0]), &DVector::from_vec(vec![0.8])).unwrap();
        assert_abs_diff_eq!(b0, 0.1, epsilon = 1e-15);
        let b0 = intercept_bias(&pi, &DVector::from_vec(vec![1.0]), &DVector::from_vec(vec![1.0])).unwrap();
        assert_eq!(b0, 0.0);
    }

    #[test]
    fn a_matrix_binary() {
        let w = DMatrix::from_column_slice(4, 1, &[1.0, 1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(a_matrix(&w)[(0, 0)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn identity_correction_variance_unchanged() {
        let (w, pi, blocks) = setup(None, 3, &[0, 1, 2, 0, 1, 2, 2, 1]);
        let rep = variance_report(&w, &blocks, &pi, 0.3).unwrap();
        assert_abs_diff_eq!(rep.var_beta_c_star, rep.var_gamma_star, epsilon = 1e-12);
    }

    #[test]
    fn single_row_design_is_rank_deficient() {
        let (w, pi, blocks) = setup(Some(Distortion::Low), 2, &[1, 1, 1]);
        assert!(matches!(
            variance_report(&w, &blocks, &pi, 1.0),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn slope_variance_matches_gram_block() {
        let (w, pi, blocks) = setup(Some(Distortion::Medium), 3, &[0, 1, 2, 0, 1, 2, 2, 1, 0, 0]);
        let rep = variance_report(&w, &blocks, &pi, 0.04).unwrap();
        let block = rep.var_gamma_star.view((1, 1), (2, 2)).into_owned();
        assert_abs_diff_eq!(rep.var_gamma_slopes, block, epsilon = 1e-12);
    }

    /// Direct O(n²) expansion of the pairwise sums.
    fn brute_force_intercept_variance(
        w_star: &DMatrix<f64>,
        pi: &DMatrix<f64>,
        correction: &DMatrix<f64>,
        sigma2: f64,
    ) -> (f64, f64) {
        let n = w_star.nrows();
        let p = w_star.ncols() - 1;
        let w = w_star.columns(1, p).into_owned();
        let wbar: Vec<f64> = (0..p).map(|c| w.column(c).mean()).collect();
        let mut a = DMatrix::zeros(p, p);
        let mut s = DMatrix::zeros(p, p);
        for i in 0..n {
            let wi = w.row(i).transpose();
            let ci = DVector::from_iterator(p, (0..p).map(|c| w[(i, c)] - wbar[c]));
            a += &wi * ci.transpose();
            s += &ci * ci.transpose();
        }
        let a_inv = a.try_inverse().unwrap();
        let var_g = &a_inv * s * a_inv.transpose() * sigma2;
        let v = pi * correction;
        let (mut all, mut diag) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let cov_y = if i == j { sigma2 } else { 0.0 };
                let vi = v.row(i);
                let vj = v.row(j);
                let cov_v = (vi * &var_g * vj.transpose())[(0, 0)];
                let cj = DVector::from_iterator(p, (0..p).map(|c| w[(j, c)] - wbar[c]));
                let ci = DVector::from_iterator(p, (0..p).map(|c| w[(i, c)] - wbar[c]));
                let cov_yj_vi = sigma2 * (cj.transpose() * a_inv.transpose() * vi.transpose())[(0, 0)];
                let cov_yi_vj = sigma2 * (ci.transpose() * a_inv.transpose() * vj.transpose())[(0, 0)];
                let term = cov_y + cov_v - cov_yj_vi - cov_yi_vj;
                all += term;
                if i == j {
                    diag += term;
                }
            }
        }
        let n2 = (n * n) as f64;
        (all / n2, diag / n2)
    }

    #[test]
    fn intercept_variance_matches_pairwise_expansion() {
        let (w, pi, blocks) = setup(Some(Distortion::Medium), 3, &[0, 1, 2, 0, 1, 2, 2, 1, 0, 0, 1]);
        let rep = variance_report(&w, &blocks, &pi, 0.09).unwrap();
        let (all, diag) = brute_force_intercept_variance(&w, &pi, &blocks.correction, 0.09);
        assert_abs_diff_eq!(rep.var_beta0_c, all, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.var_beta0_c_diagonal_terms, diag, epsilon = 1e-12);
    }

    #[test]
    fn identity_intercept_variance_is_gram_entry() {
        // With π rows equal to the dummies, β̂₀C equals γ̂₀ exactly.
        let (w, pi, blocks) = setup(None, 3, &[0, 1, 2, 0, 1, 2, 2, 1]);
        let rep = variance_report(&w, &blocks, &pi, 0.5).unwrap();
        assert_abs_diff_eq!(rep.var_beta0_c, rep.var_gamma_star[(0, 0)], epsilon = 1e-12);
    }
}
