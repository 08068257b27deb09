use std::fmt::Write as _;
use std::path::PathBuf;

use mrd_core::estimation::{estimate, BandwidthSpec, EstimationError};
use mrd_core::led_dgp::score_categories;
use mrd_core::led_dgp::Gate;
use mrd_core::unit_classification::subset_mask;
use mrd_core::{Axis, Design, EstimatorSpec, Kernel, LearnerKind, LearnerSpec, OperatorPolicy, Panel, Predicate, RdEstimate, RdSample};
use serde::{Deserialize, Serialize};

use super::{bandwidth_override, Context};
use crate::config::{self, load, write_echo, DataArgs, DataConfig};
use crate::error::{config as config_err, data, io, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated designs: sharp, fuzzy.
    #[arg(long, value_delimiter = ',')]
    pub designs: Option<Vec<Design>>,
    /// Comma-separated learners, e.g. no_adjust,lasso_global.
    #[arg(long, value_delimiter = ',')]
    pub learners: Option<Vec<LearnerKind>>,
    /// Rows to drop, e.g. "x_y <= 0".
    #[arg(long)]
    pub subset: Option<String>,
    /// Checks that the dropped rows are nevertakers or alwaystakers under this policy.
    #[arg(long)]
    pub policy: Option<OperatorPolicy>,
    #[arg(long)]
    pub kernel: Option<Kernel>,
    /// Fixed bandwidth instead of the MSE-optimal one.
    #[arg(long)]
    pub bandwidth: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default = "default_designs")]
    pub designs: Vec<Design>,
    #[serde(default = "default_learners")]
    pub learners: Vec<LearnerSpec>,
    #[serde(default)]
    pub subset: Option<String>,
    #[serde(default)]
    pub policy: Option<OperatorPolicy>,
    #[serde(default)]
    pub kernel: Kernel,
    #[serde(default)]
    pub bandwidth: BandwidthSpec,
    #[serde(default)]
    pub seed: u64,
}

fn default_designs() -> Vec<Design> {
    vec![Design::Fuzzy]
}
fn default_learners() -> Vec<LearnerSpec> {
    vec![LearnerSpec::default()]
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            data: DataConfig::default(),
            designs: default_designs(),
            learners: default_learners(),
            subset: None,
            policy: None,
            kernel: Kernel::default(),
            bandwidth: BandwidthSpec::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub design: Design,
    pub method: String,
    /// Relative to the unadjusted estimate of the same design, in percent.
    pub se_change_pct: f64,
    pub n_used: usize,
    pub n_dropped: usize,
    pub estimate: RdEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub score: String,
    pub subset: Option<String>,
    pub rows: Vec<EstimateRow>,
}

fn estimation_err(design: Design, learner: LearnerKind, e: EstimationError) -> CliError {
    CliError::Estimation(format!("{design} / {}: {e}", learner.label()))
}

/// Keep-mask of the subset, guarded by the policy categories when given.
pub(crate) fn keep_mask(panel: &Panel, score: &str, subset: Option<&str>, policy: Option<OperatorPolicy>) -> Result<Vec<bool>, CliError> {
    let Some(text) = subset else {
        return Ok(vec![true; panel.len()]);
    };
    let omega = Predicate::parse(text).map_err(|e| config_err(format!("subset: {e}")))?;
    let cats = match policy {
        None => None,
        Some(policy) => {
            let axis: Axis = score.parse().map_err(|e| config_err(format!("policy guard needs score x_d or x_y: {e}")))?;
            let cols = ["x_d", "x_y", "x_e"].map(|c| panel.require(c));
            let cols = cols.into_iter().collect::<Result<Vec<_>, _>>().map_err(data)?;
            let rows: Vec<Vec<f64>> = (0..panel.len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
            let x_r = match policy {
                OperatorPolicy::Reasonable => panel.require("x_r").map_err(data)?.to_vec(),
                _ => Vec::new(),
            };
            Some(score_categories(policy, Gate::Axis(axis), &rows, &x_r).map_err(data)?)
        }
    };
    subset_mask(&panel.rows(), Some(&omega), cats.as_deref()).map_err(data)
}

pub(crate) fn load_sample(data_cfg: &mut DataConfig, need_treatment: bool) -> Result<(Panel, RdSample), CliError> {
    let panel = data_cfg.read()?;
    let treatment = (need_treatment || panel.has(&data_cfg.treatment)).then_some(data_cfg.treatment.as_str());
    let sample = panel
        .sample(&data_cfg.score, &data_cfg.outcome, treatment, data_cfg.covariates(), &data_cfg.id_column)
        .map_err(data)?;
    Ok((panel, sample))
}

fn table(report: &EstimateReport) -> String {
    let mut out = String::from("| design | method | coef | s.e. | ci_low | ci_high | h | n_left | n_right | % s.e. change |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
    for r in &report.rows {
        let e = &r.estimate;
        let _ = writeln!(
            out,
            "| {} | {} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} | {} | {} | {:.4} |",
            r.design, r.method, e.coef, e.se, e.ci_low, e.ci_high, e.h, e.n_left, e.n_right, r.se_change_pct
        );
    }
    out
}

pub fn run(ctx: &Context, args: &Args) -> Result<(), CliError> {
    let loaded = load::<EstimateConfig>(args.config.as_deref())?;
    let mut cfg = loaded.value;
    cfg.data.resolve(&loaded.base, &args.data)?;
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    if let Some(d) = &args.designs {
        cfg.designs = d.clone();
    }
    if let Some(l) = &args.learners {
        cfg.learners = l.iter().map(|&k| LearnerSpec::new(k)).collect();
    }
    if args.subset.is_some() {
        cfg.subset = args.subset.clone();
    }
    if args.policy.is_some() {
        cfg.policy = args.policy;
    }
    if let Some(k) = args.kernel {
        cfg.kernel = k;
    }
    cfg.bandwidth = bandwidth_override(args.bandwidth, cfg.bandwidth);
    if cfg.designs.is_empty() || cfg.learners.is_empty() {
        return Err(config_err("designs, learners: must be non-empty"));
    }
    for (i, l) in cfg.learners.iter().enumerate() {
        l.validate().map_err(|e| config_err(format!("learners[{i}]: {e}")))?;
    }

    let need_d = cfg.designs.contains(&Design::Fuzzy);
    let (panel, sample) = load_sample(&mut cfg.data, need_d)?;
    let keep = keep_mask(&panel, &cfg.data.score, cfg.subset.as_deref(), cfg.policy)?;
    let n_dropped = keep.iter().filter(|k| !**k).count();
    let sample = sample.subset(&keep);

    let spec = |design: Design, learner: &LearnerSpec| EstimatorSpec {
        design,
        kernel: cfg.kernel,
        bandwidth: cfg.bandwidth,
        learner: learner.clone(),
        seed: cfg.seed,
    };
    let mut rows = Vec::new();
    for &design in &cfg.designs {
        let baseline = LearnerSpec::default();
        let base = estimate(&sample, &spec(design, &baseline)).map_err(|e| estimation_err(design, baseline.kind, e))?;
        for learner in &cfg.learners {
            let mut est = if learner.kind == LearnerKind::NoAdjust && *learner == baseline {
                base.clone()
            } else {
                estimate(&sample, &spec(design, learner)).map_err(|e| estimation_err(design, learner.kind, e))?
            };
            est.subset = cfg.subset.is_some();
            rows.push(EstimateRow {
                design,
                method: learner.kind.label().to_string(),
                se_change_pct: 100.0 * (est.se / base.se - 1.0),
                n_used: sample.len(),
                n_dropped,
                estimate: est,
            });
        }
    }
    let report = EstimateReport { score: cfg.data.score.clone(), subset: cfg.subset.clone(), rows };
    let mut json = serde_json::to_string_pretty(&report).map_err(io)?;
    json.push('\n');
    config::write(&ctx.out_dir.join("estimates.json"), json.as_bytes())?;
    let text = table(&report);
    config::write(&ctx.out_dir.join("estimates.md"), text.as_bytes())?;
    write_echo(&ctx.out_dir, &cfg)?;
    if n_dropped > 0 {
        println!("dropped {n_dropped} of {} rows", panel.len());
    }
    print!("{text}");
    Ok(())
}
