//! `miscorr scenario-tables`: the built-in misclassification presets.

use std::io::Write;

use miscorr_core::{scenario_defined, scenario_theta, Distortion};

use crate::error::{CliError, CliResult};

pub fn run(out: &mut impl Write) -> CliResult<()> {
    match write_tables(out) {
        // a closed pipe (e.g. `| head`) is not a failure
        Err(CliError::Write { message, .. }) if message.contains("Broken pipe") => Ok(()),
        other => other,
    }
}

fn write_tables(out: &mut impl Write) -> CliResult<()> {
    let fail = |e: std::io::Error| CliError::Write {
        path: "stdout".into(),
        message: e.to_string(),
    };
    for d in Distortion::ALL {
        for levels in 2..=4 {
            if !scenario_defined(d, levels) {
                writeln!(out, "# scenario={d} levels={levels}: not defined; {d} distortion exists only for 4 levels")
                    .map_err(fail)?;
                continue;
            }
            writeln!(out, "# scenario={d} levels={levels}").map_err(fail)?;
            let theta = scenario_theta(d, levels)?;
            for x in 0..levels {
                let row: Vec<String> = theta.row(x).iter().map(|v| v.to_string()).collect();
                writeln!(out, "{}", row.join(",")).map_err(fail)?;
            }
        }
    }
    Ok(())
}
