use std::fmt::Write as _;
use std::path::PathBuf;

use mrd_core::estimation::{pseudo_cutoff_test, BandwidthSpec};
use mrd_core::{Design, EstimatorSpec, Kernel, LearnerKind, LearnerSpec};
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
    /// Comma-separated cutoff shifts in score units, e.g. -0.1,0,0.1.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub shifts: Option<Vec<f64>>,
    #[arg(long)]
    pub design: Option<Design>,
    #[arg(long)]
    pub learner: Option<LearnerKind>,
    #[arg(long)]
    pub kernel: Option<Kernel>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub shifts: Vec<f64>,
    #[serde(default)]
    pub design: Design,
    #[serde(default)]
    pub learner: LearnerSpec,
    #[serde(default)]
    pub kernel: Kernel,
    #[serde(default)]
    pub bandwidth: BandwidthSpec,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            data: DataConfig::default(),
            shifts: Vec::new(),
            design: Design::Sharp,
            learner: LearnerSpec::default(),
            kernel: Kernel::default(),
            bandwidth: BandwidthSpec::default(),
            seed: 0,
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn run(ctx: &Context, args: &Args) -> Result<(), CliError> {
    let loaded = load::<ValidateConfig>(args.config.as_deref())?;
    let mut cfg = loaded.value;
    cfg.data.resolve(&loaded.base, &args.data)?;
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    if let Some(s) = &args.shifts {
        cfg.shifts = s.clone();
    }
    if let Some(d) = args.design {
        cfg.design = d;
    }
    if let Some(l) = args.learner {
        cfg.learner = LearnerSpec::new(l);
    }
    if let Some(k) = args.kernel {
        cfg.kernel = k;
    }
    cfg.bandwidth = bandwidth_override(args.bandwidth, cfg.bandwidth);
    if cfg.shifts.is_empty() {
        return Err(config_err("shifts: at least one shift is required"));
    }
    if cfg.shifts.iter().any(|s| !s.is_finite()) {
        return Err(config_err("shifts: must be finite"));
    }
    cfg.learner.validate().map_err(|e| config_err(format!("learner: {e}")))?;
    cfg.shifts.sort_by(f64::total_cmp);

    let (_, sample) = load_sample(&mut cfg.data, cfg.design == Design::Fuzzy)?;
    let spec = EstimatorSpec {
        design: cfg.design,
        kernel: cfg.kernel,
        bandwidth: cfg.bandwidth,
        learner: cfg.learner.clone(),
        seed: cfg.seed,
    };
    let rows = pseudo_cutoff_test(&sample, &cfg.shifts, &spec);
    let mut out = String::from("shift,coef,se,ci_low,ci_high,covers_zero,h,n_left,n_right,error\n");
    for r in &rows {
        match &r.estimate {
            Ok(e) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},",
                    r.shift, e.coef, e.se, e.ci_low, e.ci_high, e.covers(0.0), e.h, e.n_left, e.n_right
                );
            }
            Err(msg) => {
                let _ = writeln!(out, "{},{},{},{},{},,{},,,\"{}\"", r.shift, opt(None), opt(None), opt(None), opt(None), opt(None), msg.replace('"', "'"));
            }
        }
    }
    config::write(&ctx.out_dir.join("validation.csv"), out.as_bytes())?;
    write_echo(&ctx.out_dir, &cfg)?;
    print!("{out}");
    Ok(())
}
