//! `miscorr fit`: naive and corrected estimates for one dataset.

use miscorr_core::moments::BlockConditioning;
use miscorr_core::{encode_dummy, variance_report, Corrector};
use serde::Serialize;

use super::inputs::{prepare, MarginalReport};
use super::{check_sigma, echo_config};
use crate::config::{self, FitConfig};
use crate::error::CliResult;
use crate::io::{self, fmt_num};
use crate::{Cli, FitArgs};

#[derive(Serialize)]
struct Diagnostics<'a> {
    rows: usize,
    levels: &'a [usize],
    parameters: usize,
    sigma2_w: f64,
    /// Error variance used for the variance column.
    sigma2_used: f64,
    sigma2_source: &'static str,
    min_rcond: f64,
    conditioning: &'a [BlockConditioning],
    marginals: &'a [MarginalReport],
    /// Sum over observation pairs; the variance column reports this value.
    var_intercept_corrected: f64,
    /// Same expansion restricted to matching observation indices.
    var_intercept_corrected_diagonal_terms: f64,
    warnings: &'a [String],
}

pub fn run(cli: &Cli, args: &FitArgs) -> CliResult<()> {
    let (mut cfg, base) = config::load::<FitConfig>(cli.config.as_deref())?;
    cfg.input.resolve_paths(&base);
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    cfg.input.estimate_p |= args.estimate_p;
    if args.plugin_sigma.is_some() {
        cfg.sigma = args.plugin_sigma;
    }
    cfg.sigma = check_sigma(cfg.sigma)?;

    let prepared = prepare(&cfg.input, cfg.input.estimate_p)?;
    let corrector = Corrector::new(prepared.spec.clone(), prepared.model.clone())?;
    let ds = &prepared.data.dataset;
    let fit = corrector.fit(ds)?;
    let (sigma2, source) = match cfg.sigma {
        Some(s) => (s * s, "supplied"),
        None => (fit.naive.sigma2_w, "residual"),
    };
    let design = encode_dummy(&prepared.spec, &ds.w)?;
    let var = variance_report(&design.design_star, corrector.blocks(), &fit.pi_rows, sigma2)?;

    io::create_dir(&cfg.out)?;
    let path = cfg.out.join("estimates.csv");
    let mut w = io::csv_writer(&path)?;
    io::write_row(&mut w, &path, ["parameter", "naive", "corrected", "variance"])?;
    let corrected = fit.full();
    for (j, name) in prepared.parameter_names().iter().enumerate() {
        let variance = if j == 0 { var.var_beta0_c } else { var.var_beta_c_star[(j, j)] };
        io::write_row(
            &mut w,
            &path,
            [
                name.clone(),
                fmt_num(fit.naive.gamma_star[j]),
                fmt_num(corrected[j]),
                fmt_num(variance),
            ],
        )?;
    }
    io::finish(w, &path)?;

    let diag = Diagnostics {
        rows: ds.len(),
        levels: prepared.spec.levels(),
        parameters: prepared.spec.param_count(),
        sigma2_w: fit.naive.sigma2_w,
        sigma2_used: sigma2,
        sigma2_source: source,
        min_rcond: corrector.blocks().min_rcond(),
        conditioning: &corrector.blocks().conditioning,
        marginals: &prepared.marginals,
        var_intercept_corrected: var.var_beta0_c,
        var_intercept_corrected_diagonal_terms: var.var_beta0_c_diagonal_terms,
        warnings: &prepared.warnings,
    };
    let path = cfg.out.join("diagnostics.json");
    let text = serde_json::to_string_pretty(&diag).map_err(|e| io::write_err(&path, e))?;
    io::write_text(&path, &(text + "\n"))?;
    echo_config(&cfg.out, &cfg)
}
