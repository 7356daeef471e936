//! `miscorr` command-line front end: argument parsing, configuration, file
//! formats and the four subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "miscorr", version, about = "Regression with misclassified categorical covariates")]
pub struct Cli {
    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for simulations.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; falls back to MISCORR_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit naive and corrected estimates to a dataset.
    Fit(FitArgs),
    /// Run a simulation grid and write EQP tables and charts.
    Simulate(SimulateArgs),
    /// Conditional bias and variance, or the intercept variance study.
    Diagnose(DiagnoseArgs),
    /// Print the built-in misclassification tables.
    ScenarioTables,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Estimate each marginal from the observed frequencies.
    #[arg(long)]
    pub estimate_p: bool,
    /// Error standard deviation for the variance column instead of the
    /// residual estimate.
    #[arg(long)]
    pub plugin_sigma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Write every simulated dataset and its estimates.
    #[arg(long)]
    pub dump_data: bool,
    /// Distortion level: low, medium or high.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Levels per covariate, or "random".
    #[arg(long)]
    pub levels: Option<String>,
    /// Replace the misclassification matrices by the identity.
    #[arg(long)]
    pub identity_theta: bool,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Estimate each marginal from the observed frequencies.
    #[arg(long)]
    pub estimate_p: bool,
    /// Error standard deviation instead of the residual estimate.
    #[arg(long)]
    pub plugin_sigma: Option<f64>,
    /// Run the theoretical against empirical intercept variance study.
    #[arg(long)]
    pub intercept_study: bool,
    /// Distortion level for the study.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Levels per covariate for the study, or "random".
    #[arg(long)]
    pub levels: Option<String>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    let threads = config::thread_count(cli.threads)?;
    let work = || match &cli.command {
        Command::Fit(args) => commands::fit::run(&cli, args),
        Command::Simulate(args) => commands::simulate::run(&cli, args),
        Command::Diagnose(args) => commands::diagnose::run(&cli, args),
        Command::ScenarioTables => commands::tables::run(&mut std::io::stdout().lock()),
    };
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Threads(e.to_string()))?
            .install(work),
        None => work(),
    }
}
