use std::path::PathBuf;

use mrd_core::mc_harness::{emit_table, run_experiment, write_results, HarnessError, TableFormat};
use mrd_core::ExperimentConfig;

use super::Context;
use crate::config::load;
use crate::error::{config as config_err, io, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Units per repetition.
    #[arg(long)]
    pub n: Option<usize>,
    /// Table printed to stdout: csv, json or markdown.
    #[arg(long, default_value = "markdown")]
    pub format: String,
}

pub fn run(ctx: &Context, args: &Args) -> Result<(), CliError> {
    let mut cfg: ExperimentConfig = load(args.config.as_deref())?.value;
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    if let Some(r) = args.reps {
        cfg.reps = r;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    let format: TableFormat = args.format.parse().map_err(config_err)?;
    let report = run_experiment(&cfg).map_err(|e| match e {
        HarnessError::Config(m) => CliError::Config(m),
        other => CliError::Estimation(other.to_string()),
    })?;
    write_results(&ctx.out_dir, &cfg, &report).map_err(io)?;
    print!("{}", emit_table(&report.metrics, format).map_err(io)?);
    Ok(())
}
