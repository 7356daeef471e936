//! `miscorr simulate`: EQP grid, charts and optional data dumps.

use std::path::Path;

use miscorr_core::simkit::{EqpTable, Method, Simulation};
use rayon::prelude::*;

use super::{echo_config, parse_distortion};
use crate::config::{self, LevelsSetting, OneOrMany, SimulateConfig};
use crate::error::CliResult;
use crate::io::{self, fmt_num};
use crate::svg::{line_chart, Series};
use crate::{Cli, SimulateArgs};

pub fn run(cli: &Cli, args: &SimulateArgs) -> CliResult<()> {
    let (mut cfg, _) = config::load::<SimulateConfig>(cli.config.as_deref())?;
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(s) = &args.scenario {
        cfg.distortion = OneOrMany::One(parse_distortion(s)?);
    }
    if let Some(l) = &args.levels {
        cfg.levels = LevelsSetting::parse(l)?;
    }
    cfg.dump_data |= args.dump_data;
    cfg.identity_theta |= args.identity_theta;

    // validate every scenario before spending time on any of them
    let sims = cfg
        .scenarios()
        .into_iter()
        .map(Simulation::new)
        .collect::<Result<Vec<_>, _>>()?;

    io::create_dir(&cfg.out)?;
    let path = cfg.out.join("eqp.csv");
    let mut w = io::csv_writer(&path)?;
    io::write_row(
        &mut w,
        &path,
        ["distortion", "K", "levels", "n", "sigma", "method", "eqp", "mcse", "failures"],
    )?;
    for sim in &sims {
        let table = sim.run_grid()?;
        for r in &table.records {
            io::write_row(
                &mut w,
                &path,
                [
                    r.distortion.to_string(),
                    r.covariates.to_string(),
                    r.levels.clone(),
                    r.n.to_string(),
                    r.sigma.to_string(),
                    r.method.to_string(),
                    fmt_num(r.eqp),
                    fmt_num(r.mcse),
                    r.failures.to_string(),
                ],
            )?;
        }
        write_charts(&cfg.out, sim, &table)?;
        if cfg.dump_data {
            dump(&cfg.out, sim)?;
        }
    }
    io::finish(w, &path)?;
    echo_config(&cfg.out, &cfg)
}

fn write_charts(out: &Path, sim: &Simulation, table: &EqpTable) -> CliResult<()> {
    let c = sim.config();
    for &sigma in sim.sigmas() {
        let series: Vec<Series> = Method::ALL
            .iter()
            .map(|&m| Series {
                name: m.to_string(),
                points: c
                    .n_grid
                    .iter()
                    .filter_map(|&n| table.find(n, sigma, m).map(|r| (n as f64, r.eqp)))
                    .collect(),
            })
            .collect();
        let title = format!(
            "EQP, {} distortion, K={}, levels {}, sigma={}",
            c.distortion,
            c.covariates,
            sim.spec().signature(),
            sigma
        );
        let svg = line_chart(&title, "n", "EQP", &series);
        let name = format!("eqp_{}_K{}_sigma{}.svg", c.distortion, c.covariates, sigma);
        io::write_text(&out.join(name), &svg)?;
    }
    Ok(())
}

fn parameter_names(sim: &Simulation) -> Vec<String> {
    let spec = sim.spec();
    let mut names = vec!["intercept".to_string()];
    for k in 0..spec.covariates() {
        for l in 0..spec.levels_of(k) - 1 {
            names.push(format!("w{}_{l}", k + 1));
        }
    }
    names
}

/// Per scenario: the model files, every (replicate, sigma, n) dataset in
/// `fit` format, and the in-memory estimates for each.
fn dump(out: &Path, sim: &Simulation) -> CliResult<()> {
    let c = sim.config();
    let dir = out.join("data").join(format!("{}_K{}", c.distortion, c.covariates));
    io::create_dir(&dir)?;
    let model = sim.corrector().model();
    for (k, (theta, p)) in model.thetas().iter().zip(model.marginals()).enumerate() {
        io::write_theta(&dir.join(format!("theta_w{}.csv", k + 1)), theta)?;
        io::write_vector(&dir.join(format!("p_w{}.csv", k + 1)), p.probs())?;
    }
    let outcomes = (0..c.replicates as u64)
        .into_par_iter()
        .map(|r| -> CliResult<_> {
            let draw = sim.draw(r)?;
            let ys = (0..sim.sigmas().len())
                .map(|s| sim.response(&draw, s, r))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((draw, ys, sim.run_replicate(r)?))
        })
        .collect::<CliResult<Vec<_>>>()?;

    let names = parameter_names(sim);
    let est_path = dir.join("estimates.csv");
    let mut est = io::csv_writer(&est_path)?;
    io::write_row(&mut est, &est_path, ["replicate", "sigma", "n", "method", "parameter", "value"])?;
    for (r, (draw, ys, outcome)) in outcomes.iter().enumerate() {
        for (s, y) in ys.iter().enumerate() {
            for (ni, &n) in c.n_grid.iter().enumerate() {
                let file = dir.join(format!("rep{r}_sigma{s}_n{n}.csv"));
                io::write_dataset(&file, &y.rows(0, n).into_owned(), &draw.w.prefix(n))?;
                let Some(e) = outcome.get(s, ni) else {
                    continue;
                };
                for m in Method::ALL {
                    for (name, v) in names.iter().zip(e.get(m).iter()) {
                        io::write_row(
                            &mut est,
                            &est_path,
                            [
                                r.to_string(),
                                sim.sigmas()[s].to_string(),
                                n.to_string(),
                                m.to_string(),
                                name.clone(),
                                fmt_num(*v),
                            ],
                        )?;
                    }
                }
            }
        }
    }
    io::finish(est, &est_path)
}
