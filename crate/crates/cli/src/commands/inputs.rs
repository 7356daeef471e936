//! Loading a dataset together with its misclassification model.

use miscorr_core::{
    estimate_marginal, validate_dataset, CategoricalSpec, MarginalDist, MisclassModel, ValidationIssue,
};
use serde::Serialize;

use crate::config::InputConfig;
use crate::error::{CliError, CliResult};
use crate::io::{self, Labels, LoadedData};

#[derive(Debug, Clone, Serialize)]
pub struct MarginalReport {
    pub covariate: String,
    pub probs: Vec<f64>,
    /// Set when the marginal was recovered from observed frequencies.
    pub residual_norm: Option<f64>,
    pub projected: bool,
}

pub struct Prepared {
    pub data: LoadedData,
    pub labels: Labels,
    pub spec: CategoricalSpec,
    pub model: MisclassModel,
    pub marginals: Vec<MarginalReport>,
    pub warnings: Vec<String>,
}

impl Prepared {
    /// `intercept`, then `<column>_<level>` for every non-reference level.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = vec!["intercept".to_string()];
        for (k, col) in self.data.columns.iter().enumerate() {
            for l in 0..self.spec.levels_of(k) - 1 {
                names.push(format!("{col}_{}", self.labels.label(col, l)));
            }
        }
        names
    }
}

pub fn prepare(input: &InputConfig, estimate_p: bool) -> CliResult<Prepared> {
    let data_path = input
        .data
        .as_ref()
        .ok_or_else(|| CliError::DataMissing("no data file configured".into()))?;
    let labels = match &input.labels {
        Some(p) => Labels::load(p)?,
        None => Labels::default(),
    };
    if input.theta.is_empty() {
        return Err(CliError::ThetaMissing("no theta files configured".into()));
    }
    let data = io::read_dataset(data_path, &labels)?;
    let k = data.columns.len();
    if input.theta.len() != k {
        return Err(CliError::ThetaMissing(format!(
            "{} theta files for {k} covariates",
            input.theta.len()
        )));
    }
    let thetas = input.theta.iter().map(|p| io::read_theta(p)).collect::<CliResult<Vec<_>>>()?;
    let spec = CategoricalSpec::new(thetas.iter().map(|t| t.levels()).collect())?;

    let mut warnings = Vec::new();
    for (col, t) in data.columns.iter().zip(&thetas) {
        if t.was_renormalized() {
            warnings.push(format!("theta rows of {col} were rescaled to sum to one"));
        }
    }

    let report = validate_dataset(&spec, &data.dataset);
    for issue in &report.issues {
        match issue {
            ValidationIssue::RankRisk { covariate, level } => warnings.push(format!(
                "level {} of {} is never observed",
                labels.label(&data.columns[*covariate], *level),
                data.columns[*covariate]
            )),
            ValidationIssue::OutOfRange { row, covariate, value } => {
                return Err(miscorr_core::Error::OutOfRangeCategory {
                    row: *row,
                    covariate: *covariate,
                    value: *value,
                    levels: spec.levels_of(*covariate),
                }
                .into())
            }
            ValidationIssue::InsufficientRows { rows, required } => warnings.push(format!(
                "{rows} rows but the model needs at least {required}"
            )),
            ValidationIssue::ShapeMismatch { expected, found } => {
                return Err(miscorr_core::Error::DimensionMismatch(format!(
                    "dataset has {found} covariates, expected {expected}"
                ))
                .into())
            }
        }
    }

    let mut marginals = Vec::with_capacity(k);
    let mut reports = Vec::with_capacity(k);
    if estimate_p {
        for (i, (col, t)) in data.columns.iter().zip(&thetas).enumerate() {
            let est = estimate_marginal(t, &report.frequencies(i))?;
            if est.projected {
                warnings.push(format!("estimated marginal of {col} was projected onto the simplex"));
            }
            reports.push(MarginalReport {
                covariate: col.clone(),
                probs: est.marginal.probs().to_vec(),
                residual_norm: Some(est.residual_norm),
                projected: est.projected,
            });
            marginals.push(est.marginal);
        }
    } else {
        if input.p.is_empty() {
            return Err(CliError::MarginalMissing(
                "no marginal files configured; pass --estimate-p to estimate them".into(),
            ));
        }
        if input.p.len() != k {
            return Err(CliError::MarginalMissing(format!("{} marginal files for {k} covariates", input.p.len())));
        }
        for (col, path) in data.columns.iter().zip(&input.p) {
            let p: MarginalDist = io::read_marginal(path)?;
            if p.was_renormalized() {
                warnings.push(format!("marginal of {col} was rescaled to sum to one"));
            }
            reports.push(MarginalReport {
                covariate: col.clone(),
                probs: p.probs().to_vec(),
                residual_norm: None,
                projected: false,
            });
            marginals.push(p);
        }
    }
    let model = MisclassModel::new(thetas, marginals)?;
    Ok(Prepared {
        data,
        labels,
        spec,
        model,
        marginals: reports,
        warnings,
    })
}
