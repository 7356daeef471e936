//! Categorical covariates and their indicator (dummy) coding.
//!
//! Categories are dense integers `0..L_k`. The highest label of each
//! covariate is the reference category and gets no column. Columns are laid
//! out covariate-major, level-minor, and the intercept design prepends a
//! column of ones.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Level counts of the `K` categorical covariates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoricalSpec {
    levels: Vec<usize>,
    offsets: Vec<usize>,
}

impl CategoricalSpec {
    pub fn new(levels: Vec<usize>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidSpec("at least one covariate is required".into()));
        }
        if let Some((k, &l)) = levels.iter().enumerate().find(|(_, &l)| l < 2) {
            return Err(Error::InvalidSpec(format!(
                "covariate {k} has {l} levels; every covariate needs at least 2"
            )));
        }
        let mut offsets = Vec::with_capacity(levels.len());
        let mut acc = 0;
        for &l in &levels {
            offsets.push(acc);
            acc += l - 1;
        }
        Ok(Self { levels, offsets })
    }

    /// Same level count for every covariate.
    pub fn uniform(covariates: usize, levels: usize) -> Result<Self> {
        Self::new(vec![levels; covariates])
    }

    pub fn covariates(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn levels_of(&self, covariate: usize) -> usize {
        self.levels[covariate]
    }

    /// Number of dummy columns, `Σ (L_k − 1)`.
    pub fn slope_count(&self) -> usize {
        self.levels.iter().map(|l| l - 1).sum()
    }

    /// Slopes plus intercept.
    pub fn param_count(&self) -> usize {
        self.slope_count() + 1
    }

    /// First dummy column (without intercept) of `covariate`.
    pub fn offset(&self, covariate: usize) -> usize {
        self.offsets[covariate]
    }

    /// Dummy column of `(covariate, level)`, or `None` for the reference level.
    pub fn column_of(&self, covariate: usize, level: usize) -> Option<usize> {
        (level + 1 < self.levels[covariate]).then(|| self.offsets[covariate] + level)
    }

    /// Inverse of [`column_of`](Self::column_of).
    pub fn locate_column(&self, column: usize) -> Option<(usize, usize)> {
        if column >= self.slope_count() {
            return None;
        }
        let k = self.offsets.partition_point(|&o| o <= column) - 1;
        Some((k, column - self.offsets[k]))
    }

    /// Short signature such as `2-3-4`.
    pub fn signature(&self) -> String {
        self.levels
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// Row-major `n × K` matrix of category labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl CategoryMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<i64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for a {rows}x{cols} category matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged category rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> i64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[i64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// First `n` rows.
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.rows);
        Self {
            rows: n,
            cols: self.cols,
            data: self.data[..n * self.cols].to_vec(),
        }
    }

    fn check_against(&self, spec: &CategoricalSpec) -> Result<()> {
        if self.cols != spec.covariates() {
            return Err(Error::DimensionMismatch(format!(
                "category matrix has {} columns, spec has {} covariates",
                self.cols,
                spec.covariates()
            )));
        }
        for i in 0..self.rows {
            for (k, &v) in self.row(i).iter().enumerate() {
                let levels = spec.levels_of(k);
                if v < 0 || v as usize >= levels {
                    return Err(Error::OutOfRangeCategory {
                        row: i,
                        covariate: k,
                        value: v,
                        levels,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Response plus observed (and, in simulations, true) categories.
#[derive(Debug, Clone)]
pub struct ObservedDataset {
    pub y: DVector<f64>,
    pub w: CategoryMatrix,
    pub x: Option<CategoryMatrix>,
}

impl ObservedDataset {
    pub fn new(y: DVector<f64>, w: CategoryMatrix) -> Result<Self> {
        if y.len() != w.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} responses for {} observations",
                y.len(),
                w.nrows()
            )));
        }
        Ok(Self { y, w, x: None })
    }

    pub fn with_truth(mut self, x: CategoryMatrix) -> Result<Self> {
        if x.nrows() != self.w.nrows() || x.ncols() != self.w.ncols() {
            return Err(Error::DimensionMismatch(
                "true and observed category matrices differ in shape".into(),
            ));
        }
        self.x = Some(x);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Dummy-coded design matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignBundle {
    /// `n × Σ(L_k − 1)` indicators.
    pub design: DMatrix<f64>,
    /// Same with a leading column of ones.
    pub design_star: DMatrix<f64>,
    /// `(covariate, level)` of each column of `design`.
    pub column_map: Vec<(usize, usize)>,
}

impl DesignBundle {
    /// Restrict to the first `n` observations.
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            design: self.design.rows(0, n).into_owned(),
            design_star: self.design_star.rows(0, n).into_owned(),
            column_map: self.column_map.clone(),
        }
    }
}

pub fn encode_dummy(spec: &CategoricalSpec, categories: &CategoryMatrix) -> Result<DesignBundle> {
    categories.check_against(spec)?;
    let n = categories.nrows();
    let p = spec.slope_count();
    let mut design_star = DMatrix::<f64>::zeros(n, p + 1);
    design_star.column_mut(0).fill(1.0);
    for i in 0..n {
        for (k, &v) in categories.row(i).iter().enumerate() {
            if let Some(col) = spec.column_of(k, v as usize) {
                design_star[(i, col + 1)] = 1.0;
            }
        }
    }
    let design = design_star.columns(1, p).into_owned();
    let column_map = (0..p).filter_map(|c| spec.locate_column(c)).collect();
    Ok(DesignBundle {
        design,
        design_star,
        column_map,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationIssue {
    /// A level never appears; its dummy column (or the reference) is empty.
    RankRisk { covariate: usize, level: usize },
    InsufficientRows { rows: usize, required: usize },
    OutOfRange { row: usize, covariate: usize, value: i64 },
    ShapeMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub rows: usize,
    /// `level_counts[k][l]`: how often covariate `k` was observed at level `l`.
    pub level_counts: Vec<Vec<usize>>,
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }

    /// Observed relative frequencies of covariate `k`.
    pub fn frequencies(&self, covariate: usize) -> Vec<f64> {
        let counts = &self.level_counts[covariate];
        let total: usize = counts.iter().sum();
        counts
            .iter()
            .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
            .collect()
    }
}

pub fn validate_dataset(spec: &CategoricalSpec, ds: &ObservedDataset) -> ValidationReport {
    let rows = ds.len();
    let mut issues = Vec::new();
    let mut level_counts: Vec<Vec<usize>> = spec.levels().iter().map(|&l| vec![0; l]).collect();

    if ds.w.ncols() != spec.covariates() {
        issues.push(ValidationIssue::ShapeMismatch {
            expected: spec.covariates(),
            found: ds.w.ncols(),
        });
        return ValidationReport {
            rows,
            level_counts,
            issues,
        };
    }

    for i in 0..ds.w.nrows() {
        for (k, &v) in ds.w.row(i).iter().enumerate() {
            if v < 0 || v as usize >= spec.levels_of(k) {
                issues.push(ValidationIssue::OutOfRange {
                    row: i,
                    covariate: k,
                    value: v,
                });
            } else {
                level_counts[k][v as usize] += 1;
            }
        }
    }
    for (k, counts) in level_counts.iter().enumerate() {
        for (l, &c) in counts.iter().enumerate() {
            if c == 0 {
                issues.push(ValidationIssue::RankRisk {
                    covariate: k,
                    level: l,
                });
            }
        }
    }
    let required = spec.param_count() + 1;
    if rows < required {
        issues.push(ValidationIssue::InsufficientRows { rows, required });
    }
    ValidationReport {
        rows,
        level_counts,
        issues,
    }
}
