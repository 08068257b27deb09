use std::path::PathBuf;

use mrd_core::led_dgp::{simulate_panel, DgpError};
use mrd_core::{LotConfig, OperatorPolicy};
use serde::{Deserialize, Serialize};

use super::Context;
use crate::config::{self, load, output, write_echo};
use crate::error::{config as config_err, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    /// Panel CSV; relative paths land in the output directory.
    #[arg(long, short = 'o', default_value = "panel.csv")]
    pub output: PathBuf,
    #[arg(long)]
    pub n_lots: Option<usize>,
    #[arg(long)]
    pub policy: Option<OperatorPolicy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_n")]
    pub n_lots: usize,
    #[serde(default)]
    pub policy: OperatorPolicy,
    #[serde(default)]
    pub lot: LotConfig,
}

fn default_seed() -> u64 {
    1
}
fn default_n() -> usize {
    2000
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { seed: default_seed(), n_lots: default_n(), policy: OperatorPolicy::default(), lot: LotConfig::default() }
    }
}

pub fn run(ctx: &Context, args: &Args) -> Result<(), CliError> {
    let mut cfg: SimulateConfig = load(args.config.as_deref())?.value;
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.n_lots {
        cfg.n_lots = n;
    }
    if let Some(p) = args.policy {
        cfg.policy = p;
    }
    let panel = simulate_panel(cfg.seed, cfg.n_lots, &cfg.lot, cfg.policy).map_err(|e| match e {
        DgpError::Invalid { field, message } => config_err(format!("{field}: {message}")),
        other => CliError::Data(other.to_string()),
    })?;
    let path = output(&args.output, &ctx.out_dir);
    config::write(&path, panel.to_panel().to_csv_string().as_bytes())?;
    write_echo(&ctx.out_dir, &cfg)?;
    println!("wrote {} lots to {}", panel.len(), path.display());
    Ok(())
}
