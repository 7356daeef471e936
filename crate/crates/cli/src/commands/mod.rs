pub mod diagnose;
pub mod fit;
pub mod inputs;
pub mod simulate;
pub mod tables;

use std::path::Path;

use miscorr_core::Distortion;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io;

/// Writes the resolved config next to the results.
pub(crate) fn echo_config<T: Serialize>(out: &Path, cfg: &T) -> CliResult<()> {
    let path = out.join("config.json");
    let text = serde_json::to_string_pretty(cfg).map_err(|e| io::write_err(&path, e))?;
    io::write_text(&path, &(text + "\n"))
}

pub(crate) fn parse_distortion(s: &str) -> CliResult<Distortion> {
    s.parse()
        .map_err(|_| CliError::ConfigInvalid(format!("unknown scenario '{s}'; expected low, medium or high")))
}

pub(crate) fn check_sigma(sigma: Option<f64>) -> CliResult<Option<f64>> {
    match sigma {
        Some(s) if s.is_nan() || s <= 0.0 || s.is_infinite() => {
            Err(CliError::ConfigInvalid(format!("sigma must be positive, got {s}")))
        }
        other => Ok(other),
    }
}
