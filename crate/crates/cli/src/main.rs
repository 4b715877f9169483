//! `mesofluct` experiment driver.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use commands::Subcommand;
use config::{ExperimentConfig, RawConfig};
use error::CliError;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Recurrence coefficients CSV.
    Recurrence,
    /// Window of resolvent entries, optionally with a decay certification.
    Resolvent,
    /// Cumulant sweep over the frame grid.
    Cumulants,
    /// Cumulant differences between two weights.
    Compare,
    /// Toeplitz and Hankel identity residuals for the free symbol.
    FreeIdentities,
    /// Limiting variance by each available method.
    VarianceLimit,
    /// Monte Carlo statistics from the determinantal sampler.
    Sample,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Recurrence => Subcommand::Recurrence,
            Command::Resolvent => Subcommand::Resolvent,
            Command::Cumulants => Subcommand::Cumulants,
            Command::Compare => Subcommand::Compare,
            Command::FreeIdentities => Subcommand::FreeIdentities,
            Command::VarianceLimit => Subcommand::VarianceLimit,
            Command::Sample => Subcommand::Sample,
        }
    }
}

/// Cumulants of mesoscopic linear statistics for orthogonal polynomial ensembles.
///
/// The log level is read from MESOFLUCT_LOG.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
    /// Overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Write a gnuplot script next to each CSV.
    #[arg(long)]
    emit_plots: bool,
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut raw = match &cli.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    if let Some(seed) = cli.seed {
        raw.set("seed", seed.to_string());
    }
    let cfg = ExperimentConfig::from_raw(&raw)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0) as usize)
        .build()
        .map_err(|e| CliError::validation("--jobs", e.to_string()))?;
    let tables = pool.install(|| commands::run(cli.command.into(), &cfg))?;
    output::write_tables(&cli.out, &tables, cli.emit_plots)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MESOFLUCT_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mesofluct: error {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
