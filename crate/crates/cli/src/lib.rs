//! Command-line front end: parses a run configuration, drives the analysis
//! pipeline and writes CSV artifacts plus a JSON run manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{HistorySpec, Session, SimulateOptions, SweepOptions};
use crate::config::{default_config, parse_config, Config};
use crate::error::{CliError, ConfigError};
use crate::output::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "hemadyn", version, about = "Delay-induced stability switches in a stem-cell / growth-factor model")]
pub struct Cli {
    /// TOML configuration; the built-in reference set when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Directory for CSV files and manifest.json.
    #[arg(long, global = true, value_name = "PATH", default_value = "out")]
    pub out_dir: PathBuf,

    /// Delay grid spacing; overrides run.grid_step.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub grid_step: Option<f64>,

    /// Seed for randomized self-checks.
    #[arg(long, global = true, value_name = "INT", default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Equilibrium branch over the delay grid (tau, Qstar, Mstar, Estar, kind).
    Equilibria,
    /// Linearization and characteristic coefficients over the delay grid.
    Coeffs,
    /// S_n curves, crossing reports and the stability partition.
    Scan,
    /// Integrate the delay system at one delay.
    Simulate(SimulateArgs),
    /// Classify long-run behaviour over a range of delays.
    Sweep(SweepArgs),
    /// Full pipeline with checks; exits 4 when any check fails.
    Reproduce,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub tau: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub t_end: f64,
    /// Start of the window used for classification.
    #[arg(long, default_value_t = 0.0)]
    pub transient: f64,
    #[arg(long)]
    pub max_step: Option<f64>,
    /// `Q,M,E` or `equilibrium*FACTOR`; defaults to the equilibrium scaled by run.history_factor.
    #[arg(long)]
    pub history: Option<HistorySpec>,
    /// Write every N-th mesh point; defaults to run.output_stride.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Output file, relative to --out-dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 0.1)]
    pub tau_from: f64,
    /// Defaults to tau_max (exclusive).
    #[arg(long)]
    pub tau_to: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub tau_step: f64,
    #[arg(long, default_value_t = 2500.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 800.0)]
    pub transient: f64,
    #[arg(long)]
    pub max_step: Option<f64>,
    #[arg(long)]
    pub history: Option<HistorySpec>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Equilibria => "equilibria",
            Command::Coeffs => "coeffs",
            Command::Scan => "scan",
            Command::Simulate(_) => "simulate",
            Command::Sweep(_) => "sweep",
            Command::Reproduce => "reproduce",
        }
    }
}

pub fn load_config(cli: &Cli) -> Result<Config, ConfigError> {
    let mut config = match &cli.config {
        Some(path) => parse_config(path)?,
        None => default_config(),
    };
    if let Some(step) = cli.grid_step {
        if !(step > 0.0 && step.is_finite()) {
            return Err(ConfigError::Flag { flag: "--grid-step", message: format!("{step} is not > 0") });
        }
        config.run.grid_step = step;
    }
    Ok(config)
}

/// Runs one subcommand and writes its manifest. Failed checks are reported
/// in the manifest, not as an error.
pub fn execute(cli: &Cli) -> Result<RunManifest, CliError> {
    let config = load_config(cli)?;
    let mut session = Session::new(config, &cli.out_dir, cli.seed)?;
    match &cli.command {
        Command::Equilibria => commands::equilibria(&mut session)?,
        Command::Coeffs => commands::coeffs(&mut session)?,
        Command::Scan => {
            commands::scan_cmd(&mut session)?;
        }
        Command::Simulate(a) => commands::simulate(
            &mut session,
            &SimulateOptions {
                tau: a.tau,
                t_end: a.t_end,
                transient: a.transient,
                max_step: a.max_step,
                history: a.history,
                stride: a.stride,
                out: a.out.clone(),
            },
        )?,
        Command::Sweep(a) => commands::sweep(
            &mut session,
            &SweepOptions {
                tau_from: a.tau_from,
                tau_to: a.tau_to,
                tau_step: a.tau_step,
                t_end: a.t_end,
                transient: a.transient,
                max_step: a.max_step,
                history: a.history,
                out: a.out.clone(),
            },
        )?,
        Command::Reproduce => commands::reproduce(&mut session)?,
    }
    session.finish(cli.command.name())
}
