//! `nhpp` command-line driver: configuration, file formats and orchestration
//! of simulation, fitting, coincidence probabilities and validation runs.

pub mod catalog_file;
pub mod chain_file;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
pub use crate::error::{CliError, CliResult};
use crate::error::config_err;

#[derive(Debug, Parser)]
#[command(name = "nhpp", version, about = "Noisy Poisson point process fitting and coincidence probabilities")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; overrides the config. Defaults to all cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Simulate a catalog from a model.
    Simulate,
    /// Fit intensity hyperparameters with several chains.
    Fit,
    /// Coincidence probabilities of labelled clusters.
    Pc,
    /// Bound against empirical k-contact frequencies.
    ValidateBound,
    /// Credible-interval coverage on synthetic data.
    Coverage,
    /// Convergence diagnostics of stored chains.
    Diagnose,
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let path = cli.config.as_ref().ok_or_else(|| config_err("--config is required"))?;
    let cfg = RunConfig::load(path)?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let mut pool = rayon::ThreadPoolBuilder::new();
    match cli.workers.or(cfg.workers) {
        Some(0) => return Err(config_err("workers must be >= 1")),
        Some(n) => pool = pool.num_threads(n),
        None => {}
    }
    let pool = pool.build().map_err(|e| config_err(format!("worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Simulate => commands::simulate(&cfg, seed),
        Command::Fit => commands::fit(&cfg, seed),
        Command::Pc => commands::pc(&cfg, seed),
        Command::ValidateBound => commands::validate_bound(&cfg, seed),
        Command::Coverage => commands::coverage(&cfg, seed),
        Command::Diagnose => commands::diagnose_chains(&cfg, seed),
    })
}

/// Parses `args` (program name first) and runs; usage errors count as config errors.
pub fn run_args<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| config_err(e.to_string()))?;
    run(&cli)
}
