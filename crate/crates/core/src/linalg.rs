//! Small dense linear-algebra helpers shared by the estimators and diagnostics.

use nalgebra::{DMatrix, DVector, QR};

/// Threshold below which a matrix is treated as numerically singular.
pub const RCOND_FLOOR: f64 = 1e-10;

/// Relative size of an R diagonal entry, against the largest one, below which
/// the design column is declared collinear.
pub const QR_RANK_TOL: f64 = 1e-10;

/// Ratio of the smallest to the largest singular value. Zero for an all-zero
/// or empty-spectrum matrix.
pub fn reciprocal_condition(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || !min.is_finite() {
        return 0.0;
    }
    min / max
}

/// Householder QR factorization of a tall design, kept around so one
/// factorization can serve several responses.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    qr: QR<f64, nalgebra::Dyn, nalgebra::Dyn>,
    r: DMatrix<f64>,
    rows: usize,
    cols: usize,
}

impl LeastSquares {
    /// Factors `design`. On failure returns the index of the first column whose
    /// R diagonal falls below the rank tolerance.
    pub fn factor(design: &DMatrix<f64>) -> std::result::Result<Self, usize> {
        let (rows, cols) = design.shape();
        if rows < cols || cols == 0 {
            return Err(rows.min(cols));
        }
        let qr = design.clone().qr();
        let r = qr.r();
        let max = r.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if let Some(bad) = r
            .diagonal()
            .iter()
            .position(|v| !(v.abs() >= QR_RANK_TOL * max) || max == 0.0)
        {
            return Err(bad);
        }
        Ok(Self { qr, r, rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Coefficients minimizing `||design * b - y||`.
    pub fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        assert_eq!(y.len(), self.rows, "response length must match design rows");
        let mut qty = y.clone();
        self.qr.q_tr_mul(&mut qty);
        let head = qty.rows(0, self.cols).into_owned();
        self.r
            .solve_upper_triangular(&head)
            .expect("R diagonal was checked at factorization")
    }

    /// Column-wise least squares for a matrix right-hand side.
    pub fn solve_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(rhs.nrows(), self.rows, "rhs rows must match design rows");
        let mut qtb = rhs.clone();
        self.qr.q_tr_mul(&mut qtb);
        let head = qtb.rows(0, self.cols).into_owned();
        self.r
            .solve_upper_triangular(&head)
            .expect("R diagonal was checked at factorization")
    }

    /// `(XᵀX)⁻¹ = R⁻¹R⁻ᵀ`.
    pub fn gram_inverse(&self) -> DMatrix<f64> {
        let eye = DMatrix::<f64>::identity(self.cols, self.cols);
        let r_inv = self
            .r
            .solve_upper_triangular(&eye)
            .expect("R diagonal was checked at factorization");
        let g = &r_inv * r_inv.transpose();
        symmetrize(&g)
    }
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Inverse of a small square matrix guarded by its reciprocal condition.
pub fn guarded_inverse(m: &DMatrix<f64>) -> std::result::Result<DMatrix<f64>, f64> {
    let rcond = reciprocal_condition(m);
    if !(rcond >= RCOND_FLOOR) {
        return Err(rcond);
    }
    m.clone().try_inverse().ok_or(rcond)
}
