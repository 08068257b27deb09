//! Front end for simulating, classifying and estimating multi-score
//! regression discontinuity designs.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "mrd", version, about = "Multi-score regression discontinuity toolkit")]
pub struct Cli {
    /// Master seed; overrides the config value.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "MRD_THREADS")]
    pub threads: Option<usize>,
    /// Directory for outputs and the config echo.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a panel of rework lots.
    Simulate(commands::simulate::Args),
    /// Classify units of a panel against an assignment rule.
    Classify(commands::classify::Args),
    /// Estimate the effect at the cutoff of one score.
    Estimate(commands::estimate::Args),
    /// Run a Monte Carlo experiment.
    Mc(commands::mc::Args),
    /// Placebo estimates at shifted cutoffs.
    Validate(commands::validate::Args),
    /// Binned means and fitted lines around the cutoff.
    Rdplot(commands::rdplot::Args),
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(error::config("--threads must be at least 1"));
        }
        // a pool may already exist when run twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    std::fs::create_dir_all(&cli.out_dir).map_err(|e| error::io(format!("{}: {e}", cli.out_dir.display())))?;
    let ctx = commands::Context { seed: cli.seed, out_dir: cli.out_dir };
    match cli.command {
        Command::Simulate(a) => commands::simulate::run(&ctx, &a),
        Command::Classify(a) => commands::classify::run(&ctx, &a),
        Command::Estimate(a) => commands::estimate::run(&ctx, &a),
        Command::Mc(a) => commands::mc::run(&ctx, &a),
        Command::Validate(a) => commands::validate::run(&ctx, &a),
        Command::Rdplot(a) => commands::rdplot::run(&ctx, &a),
    }
}
