//! Batch experiment front end for the stochastic hybrid-stress finite element
//! library: validates a JSON experiment config, runs it, and writes CSV /
//! Markdown tables plus a re-runnable metadata record.

#![allow(clippy::large_enum_variant)]
// negated comparisons like `!(x > 0.0)` are deliberate: they reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::type_complexity)]

mod config;
mod expr;
mod mesh_io;
mod presets;
mod run;

use std::fs;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use run::RunError;

#[derive(Parser)]
#[command(
    name = "shsfem",
    version,
    about = "Stochastic hybrid-stress finite element experiments on quadrilateral meshes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config (a config JSON or a previous run.json).
    Run {
        /// Path to the configuration file.
        config: String,
        /// Output directory override.
        #[arg(long)]
        out: Option<String>,
    },
    /// Run a named preset experiment.
    Preset {
        /// Preset name (see `shsfem list`).
        name: String,
        /// Output directory override.
        #[arg(long)]
        out: Option<String>,
    },
    /// List the available presets.
    List,
}

fn load_config(path: &str) -> Result<ExperimentConfig, RunError> {
    let text = fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("reading {path}: {e}")))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{path}: {e}")))?;
    // accept a previous run.json (config embedded under "config")
    let config_value = match value.get("config") {
        Some(inner) => inner.clone(),
        None => value,
    };
    serde_json::from_value(config_value).map_err(|e| RunError::Config(format!("{path}: {e}")))
}

fn execute_and_write(config: &ExperimentConfig, out: Option<&str>) -> Result<(), RunError> {
    config.validate().map_err(RunError::Config)?;
    let outcome = run::execute(config)?;
    let dir = run::write_outputs(config, &outcome, out)?;
    let n = outcome
        .rows
        .len()
        .max(outcome.stability.len())
        .max(outcome.kl_modes.len());
    println!(
        "wrote {} record(s) to {}/table.csv, table.md, run.json",
        n,
        dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, out } => {
            load_config(config).and_then(|c| execute_and_write(&c, out.as_deref()))
        }
        Command::Preset { name, out } => match presets::preset(name) {
            Some(c) => execute_and_write(&c, out.as_deref()),
            None => Err(RunError::Config(format!(
                "unknown preset '{name}'; see `shsfem list`"
            ))),
        },
        Command::List => {
            for (name, description) in presets::PRESET_NAMES {
                println!("{name:20} {description}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ RunError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e @ RunError::Solver(_)) => {
            eprintln!("{e}");
            ExitCode::from(3)
        }
    }
}
