//! `gepp` — solver and analysis CLI for power allocation over two
//! identical Gilbert-Elliott channels.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

mod commands;
mod config;
mod output;

use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("structural anomaly detected: {0}")]
    Anomaly(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Anomaly(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "gepp",
    version,
    about = "Optimal power allocation over two Gilbert-Elliott channels: \
             belief-MDP solvers, threshold analysis, LP export, simulation"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config's output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Border cells per edge (overrides the config).
    #[arg(long, global = true)]
    grid_n: Option<usize>,

    /// Solver tolerance (overrides the config).
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// RNG seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run both solvers, certify LP optimality, export value surfaces.
    Solve,
    /// Extract the greedy policy, scan thresholds, evaluate closed forms.
    Policy,
    /// Solve across a parameter sweep and tabulate normalized thresholds.
    Sweep,
    /// Monte Carlo rollouts and paired policy comparison.
    Simulate,
    /// Write the value LP in text form.
    ExportLp,
    /// Re-derive every certificate for one instance.
    Verify,
}

fn init_thread_pool() {
    if let Ok(v) = std::env::var("GEPP_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let mut config = RunConfig::load(config_path)?;
    if let Some(n) = cli.grid_n {
        config.grid_n = n;
    }
    if let Some(t) = cli.tol {
        config.tol = t;
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| {
            CliError::Config("no output directory: set --out or output_dir in the config".into())
        })?;

    match cli.command {
        Command::Solve => commands::cmd_solve(&config, &out_dir),
        Command::Policy => commands::cmd_policy(&config, &out_dir),
        Command::Sweep => commands::cmd_sweep(&config, &out_dir),
        Command::Simulate => commands::cmd_simulate(&config, &out_dir),
        Command::ExportLp => commands::cmd_export_lp(&config, &out_dir),
        Command::Verify => commands::cmd_verify(&config, &out_dir),
    }
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gepp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
