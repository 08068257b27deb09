use std::path::PathBuf;

use mrd_core::estimation::{rd_plot_data, select_bandwidth, BandwidthSpec};
use mrd_core::Kernel;
use serde::{Deserialize, Serialize};

use super::estimate::load_sample;
use super::{bandwidth_override, Context};
use crate::config::{self, load, write_echo, DataArgs, DataConfig};
use crate::error::{config as config_err, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Bins per side.
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub kernel: Option<Kernel>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RdplotConfig {
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub kernel: Kernel,
    #[serde(default)]
    pub bandwidth: BandwidthSpec,
}

fn default_bins() -> usize {
    20
}

impl Default for RdplotConfig {
    fn default() -> Self {
        RdplotConfig { data: DataConfig::default(), bins: default_bins(), kernel: Kernel::default(), bandwidth: BandwidthSpec::default() }
    }
}

pub fn run(ctx: &Context, args: &Args) -> Result<(), CliError> {
    let loaded = load::<RdplotConfig>(args.config.as_deref())?;
    let mut cfg = loaded.value;
    cfg.data.resolve(&loaded.base, &args.data)?;
    if let Some(b) = args.bins {
        cfg.bins = b;
    }
    if let Some(k) = args.kernel {
        cfg.kernel = k;
    }
    cfg.bandwidth = bandwidth_override(args.bandwidth, cfg.bandwidth);
    if cfg.bins < 2 {
        return Err(config_err("bins: must be at least 2"));
    }
    // covariates play no part in the plot
    cfg.data.covariates.get_or_insert_with(Vec::new);
    let (_, sample) = load_sample(&mut cfg.data, false)?;
    let (h, _) = select_bandwidth(&sample.x, &sample.y, cfg.kernel, cfg.bandwidth).map_err(|e| CliError::Estimation(e.to_string()))?;
    let plot = rd_plot_data(&sample.x, &sample.y, cfg.bins, cfg.kernel, h).map_err(|e| CliError::Estimation(e.to_string()))?;
    config::write(&ctx.out_dir.join("rdplot.csv"), plot.to_csv().as_bytes())?;
    write_echo(&ctx.out_dir, &cfg)?;
    println!("h = {h}; {} bins and {} fitted segments", plot.bins.len(), plot.fits.len());
    Ok(())
}
