//! `miscorr diagnose`: conditional bias and variance tables, or the
//! theoretical against empirical intercept variance study.

use std::path::Path;

use miscorr_core::simkit::{SigmaSource, Simulation};
use miscorr_core::{bias_report, encode_dummy, variance_report, Corrector, DVector, Error};

use super::inputs::prepare;
use super::{check_sigma, echo_config, parse_distortion};
use crate::config::{self, DiagnoseConfig, LevelsSetting, SigmaSourceSetting};
use crate::error::{CliError, CliResult};
use crate::io::{self, fmt_num};
use crate::svg::{line_chart, Series};
use crate::{Cli, DiagnoseArgs};

pub fn run(cli: &Cli, args: &DiagnoseArgs) -> CliResult<()> {
    let (mut cfg, base) = config::load::<DiagnoseConfig>(cli.config.as_deref())?;
    cfg.input.resolve_paths(&base);
    cfg.truth = cfg.truth.as_ref().map(|p| io::resolve(&base, p));
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    cfg.input.estimate_p |= args.estimate_p;
    if args.plugin_sigma.is_some() {
        cfg.sigma = args.plugin_sigma;
    }
    cfg.sigma = check_sigma(cfg.sigma)?;

    if args.intercept_study {
        let study = &mut cfg.intercept_study;
        if let Some(seed) = cli.seed {
            study.seed = seed;
        }
        if let Some(s) = &args.scenario {
            study.distortion = parse_distortion(s)?;
        }
        if let Some(l) = &args.levels {
            study.levels = LevelsSetting::parse(l)?;
        }
        intercept_study(&cfg)?;
    } else {
        conditional(&cfg)?;
    }
    echo_config(&cfg.out, &cfg)
}

fn conditional(cfg: &DiagnoseConfig) -> CliResult<()> {
    let truth_path = cfg
        .truth
        .as_ref()
        .ok_or_else(|| CliError::TruthRequired("no truth file configured".into()))?;
    if !truth_path.is_file() {
        return Err(CliError::TruthRequired(truth_path.display().to_string()));
    }
    let truth = DVector::from_vec(io::read_vector(truth_path)?);

    let prepared = prepare(&cfg.input, cfg.input.estimate_p)?;
    if truth.len() != prepared.spec.param_count() {
        return Err(Error::DimensionMismatch(format!(
            "truth has {} coefficients, model has {}",
            truth.len(),
            prepared.spec.param_count()
        ))
        .into());
    }
    let corrector = Corrector::new(prepared.spec.clone(), prepared.model.clone())?;
    let ds = &prepared.data.dataset;
    let fit = corrector.fit(ds)?;
    let design = encode_dummy(&prepared.spec, &ds.w)?;
    let sigma2 = cfg.sigma.map(|s| s * s).unwrap_or(fit.naive.sigma2_w);
    let bias = bias_report(&design.design_star, &fit.pi_rows, corrector.blocks(), &truth)?;
    let var = variance_report(&design.design_star, corrector.blocks(), &fit.pi_rows, sigma2)?;
    let names = prepared.parameter_names();

    io::create_dir(&cfg.out)?;
    let path = cfg.out.join("bias.csv");
    let mut w = io::csv_writer(&path)?;
    io::write_row(&mut w, &path, ["parameter", "bias"])?;
    for (name, b) in names.iter().zip(bias.b_star.iter()) {
        io::write_row(&mut w, &path, [name.clone(), fmt_num(*b)])?;
    }
    io::write_row(&mut w, &path, ["intercept_corrected".to_string(), fmt_num(bias.b0)])?;
    io::finish(w, &path)?;

    let path = cfg.out.join("variance.csv");
    let mut w = io::csv_writer(&path)?;
    io::write_row(&mut w, &path, ["quantity", "parameter", "value"])?;
    for (quantity, m) in [("var_naive", &var.var_gamma_star), ("var_slope_corrected", &var.var_beta_c_star)] {
        for (j, name) in names.iter().enumerate() {
            io::write_row(&mut w, &path, [quantity.to_string(), name.clone(), fmt_num(m[(j, j)])])?;
        }
    }
    let extra = [
        ("var_intercept_corrected", var.var_beta0_c),
        ("var_intercept_corrected_diagonal_terms", var.var_beta0_c_diagonal_terms),
        ("sigma2", sigma2),
    ];
    for (quantity, v) in extra {
        let parameter = if quantity == "sigma2" { "" } else { "intercept" };
        io::write_row(&mut w, &path, [quantity, parameter, &fmt_num(v)])?;
    }
    io::finish(w, &path)
}

fn intercept_study(cfg: &DiagnoseConfig) -> CliResult<()> {
    let study = &cfg.intercept_study;
    let sim = Simulation::new(study.scenario())?;
    let source = match study.sigma_source {
        SigmaSourceSetting::Plugin => SigmaSource::PlugIn,
        SigmaSourceSetting::Known => SigmaSource::Known,
    };
    let rows = sim.intercept_variance_study(source)?;

    io::create_dir(&cfg.out)?;
    let path = cfg.out.join("intercept_variance.csv");
    let mut w = io::csv_writer(&path)?;
    io::write_row(
        &mut w,
        &path,
        [
            "sigma",
            "n",
            "empirical_full",
            "empirical_none",
            "theoretical",
            "relative_gap",
            "replicates",
            "failures",
        ],
    )?;
    for r in &rows {
        io::write_row(
            &mut w,
            &path,
            [
                r.sigma.to_string(),
                r.n.to_string(),
                fmt_num(r.empirical_full),
                fmt_num(r.empirical_none),
                fmt_num(r.theoretical),
                fmt_num(r.relative_gap),
                r.replicates.to_string(),
                r.failures.to_string(),
            ],
        )?;
    }
    io::finish(w, &path)?;

    for &sigma in sim.sigmas() {
        let pick = |f: fn(&miscorr_core::simkit::InterceptVarianceRow) -> f64| {
            rows.iter()
                .filter(|r| r.sigma == sigma)
                .map(|r| (r.n as f64, f(r)))
                .collect::<Vec<_>>()
        };
        let series = vec![
            Series {
                name: "full".into(),
                points: pick(|r| r.empirical_full),
            },
            Series {
                name: "none".into(),
                points: pick(|r| r.empirical_none),
            },
            Series {
                name: "theoretical".into(),
                points: pick(|r| r.theoretical),
            },
        ];
        let title = format!(
            "Intercept variance, {} distortion, levels {}, sigma={}",
            study.distortion,
            sim.spec().signature(),
            sigma
        );
        let svg = line_chart(&title, "n", "variance", &series);
        write_svg(&cfg.out, &format!("intercept_variance_sigma{sigma}.svg"), &svg)?;
    }
    Ok(())
}

fn write_svg(dir: &Path, name: &str, svg: &str) -> CliResult<()> {
    io::write_text(&dir.join(name), svg)
}
