//! Repeated-simulation experiments and their summary tables.

mod metrics;
mod table;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{compute_metrics, MetricsRow};
pub use table::{emit_table, parse_metrics_csv, TableFormat};

use crate::adjustment_learners::LearnerSpec;
use crate::estimation::{estimate, select_bandwidth, BandwidthSpec, Design, EstimatorSpec, Kernel, RdEstimate, RdSample};
use crate::led_dgp::{oracle_effect, DgpError, policy_categories, simulate_panel, Axis, Estimand, Gate, LotConfig, OperatorPolicy};
use crate::predicate::Predicate;
use crate::seeding::derive_seed;
use crate::synthetic::SyntheticConfig;
use crate::unit_classification::subset_mask;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("every repetition failed for {setting} / {method}")]
    AllFailed { setting: String, method: String },
    #[error("unknown table format {0:?} (expected csv, json or markdown)")]
    UnknownFormat(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Data-generating process of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DgpSpec {
    /// Simulated rework lots.
    Led {
        #[serde(default)]
        policy: OperatorPolicy,
        #[serde(default)]
        lot: LotConfig,
    },
    /// Single-score design with a known jump.
    Synthetic {
        #[serde(default)]
        synthetic: SyntheticConfig,
    },
}

impl Default for DgpSpec {
    fn default() -> Self {
        DgpSpec::Led { policy: OperatorPolicy::Cautious, lot: LotConfig::default() }
    }
}

fn default_seed() -> u64 {
    1
}
fn default_reps() -> usize {
    250
}
fn default_n() -> usize {
    10_000
}
fn default_axes() -> Vec<Axis> {
    vec![Axis::D, Axis::Y]
}
fn default_designs() -> Vec<Design> {
    vec![Design::Fuzzy, Design::Sharp]
}
fn default_learners() -> Vec<LearnerSpec> {
    vec![LearnerSpec::default()]
}
fn default_subsets() -> Vec<bool> {
    vec![false, true]
}

/// Experiment definition. Every estimator in the grid
/// `axes x subsets x designs x learners` runs on every repetition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    /// Units per repetition.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub dgp: DgpSpec,
    /// Ignored by synthetic designs, which have a single score.
    #[serde(default = "default_axes")]
    pub axes: Vec<Axis>,
    #[serde(default = "default_designs")]
    pub designs: Vec<Design>,
    #[serde(default = "default_learners")]
    pub learners: Vec<LearnerSpec>,
    /// `true` drops the units at or below the other score's cutoff.
    #[serde(default = "default_subsets")]
    pub subsets: Vec<bool>,
    #[serde(default)]
    pub kernel: Kernel,
    #[serde(default)]
    pub bandwidth: BandwidthSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.reps == 0 {
            return bad("reps: must be at least 1");
        }
        if self.n == 0 {
            return bad("n: must be at least 1");
        }
        if self.designs.is_empty() || self.learners.is_empty() || self.subsets.is_empty() {
            return bad("estimator grid: designs, learners and subsets must be non-empty");
        }
        for (i, l) in self.learners.iter().enumerate() {
            l.validate().map_err(|e| HarnessError::Config(format!("learners[{i}]: {e}")))?;
        }
        if let BandwidthSpec::Fixed { h } = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return bad("bandwidth.h: must be positive");
            }
        }
        match &self.dgp {
            DgpSpec::Led { lot, .. } => {
                if self.axes.is_empty() {
                    return bad("axes: must be non-empty");
                }
                lot.validate().map_err(|e| match e {
                    DgpError::Invalid { field, message } => HarnessError::Config(format!("dgp.{field}: {message}")),
                    other => HarnessError::Config(other.to_string()),
                })?;
            }
            DgpSpec::Synthetic { synthetic } => {
                if self.subsets.iter().any(|&s| s) {
                    return bad("subsets: synthetic designs have no second score to subset on");
                }
                synthetic.validate().map_err(|e| HarnessError::Config(format!("dgp.{e}")))?;
            }
        }
        Ok(())
    }

    /// Grid cells in output order: `(setting, design, subset, learner index)`.
    fn cells(&self) -> Vec<Cell> {
        let axes: Vec<Option<Axis>> = match self.dgp {
            DgpSpec::Led { .. } => self.axes.iter().copied().map(Some).collect(),
            DgpSpec::Synthetic { .. } => vec![None],
        };
        let mut out = Vec::new();
        for &axis in &axes {
            for &subset in &self.subsets {
                for &design in &self.designs {
                    for learner in 0..self.learners.len() {
                        out.push(Cell { axis, subset, design, learner });
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
struct Cell {
    axis: Option<Axis>,
    subset: bool,
    design: Design,
    learner: usize,
}

impl Cell {
    fn setting(&self) -> String {
        let axis = self.axis.map_or("x", Axis::column);
        let sample = if self.subset { "subset" } else { "full" };
        format!("{axis}/{}/{sample}", self.design.to_string().to_lowercase())
    }
}

/// One estimator on one repetition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub rep: usize,
    pub seed: u64,
    pub setting: String,
    pub method: String,
    pub learner: String,
    pub coef: Option<f64>,
    pub se: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub h: Option<f64>,
    pub b: Option<f64>,
    pub n_left: Option<usize>,
    pub n_right: Option<usize>,
    pub oracle: Option<f64>,
    pub rmse_left: Option<f64>,
    pub logloss_left: Option<f64>,
    pub rmse_right: Option<f64>,
    pub logloss_right: Option<f64>,
    pub error: Option<String>,
}

impl RawRow {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    fn new(rep: usize, seed: u64, cell: &Cell, spec: &LearnerSpec) -> Self {
        RawRow {
            rep,
            seed,
            setting: cell.setting(),
            method: spec.kind.label().to_string(),
            learner: spec.kind.key().to_string(),
            coef: None,
            se: None,
            ci_low: None,
            ci_high: None,
            h: None,
            b: None,
            n_left: None,
            n_right: None,
            oracle: None,
            rmse_left: None,
            logloss_left: None,
            rmse_right: None,
            logloss_right: None,
            error: None,
        }
    }

    fn fill(mut self, est: Result<RdEstimate, String>, oracle: Result<f64, String>) -> Self {
        let est = match (est, oracle) {
            (Ok(e), Ok(o)) => {
                self.oracle = Some(o);
                e
            }
            (Err(e), _) => {
                self.error = Some(e);
                return self;
            }
            (_, Err(e)) => {
                self.error = Some(format!("oracle: {e}"));
                return self;
            }
        };
        self.coef = Some(est.coef);
        self.se = Some(est.se);
        self.ci_low = Some(est.ci_low);
        self.ci_high = Some(est.ci_high);
        self.h = Some(est.h);
        self.b = Some(est.b);
        self.n_left = Some(est.n_left);
        self.n_right = Some(est.n_right);
        self.rmse_left = est.first_stage.rmse_left;
        self.rmse_right = est.first_stage.rmse_right;
        self.logloss_left = est.first_stage.logloss_left;
        self.logloss_right = est.first_stage.logloss_right;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metrics: Vec<MetricsRow>,
    pub raw: Vec<RawRow>,
}

/// Seed of repetition `rep`; estimator folds reuse it.
pub fn rep_seed(master: u64, rep: usize) -> u64 {
    derive_seed(master, rep as u64)
}

fn spec_for(cfg: &ExperimentConfig, cell: &Cell, seed: u64) -> EstimatorSpec {
    EstimatorSpec {
        design: cell.design,
        kernel: cfg.kernel,
        bandwidth: cfg.bandwidth,
        learner: cfg.learners[cell.learner].clone(),
        seed,
    }
}

fn run_estimate(sample: &RdSample, spec: &EstimatorSpec, subset: bool) -> Result<RdEstimate, String> {
    estimate(sample, spec).map(|mut e| {
        e.subset = subset;
        e
    }).map_err(|e| e.to_string())
}

/// Omega of the subset estimate on `axis`: units at or below the other cutoff.
pub fn subset_predicate(axis: Axis) -> Predicate {
    Predicate::parse(&format!("{} <= 0", axis.other().column())).expect("static predicate")
}

fn run_rep(cfg: &ExperimentConfig, cells: &[Cell], rep: usize) -> Vec<RawRow> {
    let seed = rep_seed(cfg.seed, rep);
    let blank = |cell: &Cell| RawRow::new(rep, seed, cell, &cfg.learners[cell.learner]);
    let fail_all = |msg: String| -> Vec<RawRow> {
        cells.iter().map(|c| blank(c).fill(Err(msg.clone()), Err(String::new()))).collect()
    };
    match &cfg.dgp {
        DgpSpec::Synthetic { synthetic } => {
            let sample = synthetic.sample(seed, cfg.n);
            cells
                .iter()
                .map(|c| blank(c).fill(run_estimate(&sample, &spec_for(cfg, c, seed), false), Ok(synthetic.jump)))
                .collect()
        }
        DgpSpec::Led { policy, lot } => {
            let panel = match simulate_panel(seed, cfg.n, lot, *policy) {
                Ok(p) => p,
                Err(e) => return fail_all(e.to_string()),
            };
            let table = panel.to_panel();
            let rows = table.rows();
            let mut out = Vec::with_capacity(cells.len());
            // cells come grouped by (axis, subset)
            let mut i = 0;
            while i < cells.len() {
                let (axis, subset) = (cells[i].axis.expect("led cells have an axis"), cells[i].subset);
                let group: Vec<&Cell> = cells[i..].iter().take_while(|c| c.axis == Some(axis) && c.subset == subset).collect();
                i += group.len();
                let keep = if subset {
                    policy_categories(*policy, Gate::Axis(axis), &panel)
                        .map_err(|e| e.to_string())
                        .and_then(|cats| subset_mask(&rows, Some(&subset_predicate(axis)), Some(&cats)).map_err(|e| e.to_string()))
                } else {
                    Ok(vec![true; panel.len()])
                };
                let keep = match keep {
                    Ok(k) => k,
                    Err(e) => {
                        out.extend(group.iter().map(|c| blank(c).fill(Err(e.clone()), Err(String::new()))));
                        continue;
                    }
                };
                let sub = panel.subset(&keep);
                let sample = sub.sample(axis);
                let oracle = |estimand| {
                    select_bandwidth(&sample.x, &sample.y, cfg.kernel, cfg.bandwidth)
                        .map_err(|e| e.to_string())
                        .and_then(|(h, _)| oracle_effect(&sub, axis, estimand, cfg.kernel, h).map_err(|e| e.to_string()))
                };
                let complier = oracle(Estimand::Complier);
                let itt = oracle(Estimand::Itt);
                for c in group {
                    let o = match c.design {
                        Design::Fuzzy => complier.clone(),
                        Design::Sharp => itt.clone(),
                    };
                    out.push(blank(c).fill(run_estimate(&sample, &spec_for(cfg, c, seed), subset), o));
                }
            }
            out
        }
    }
}

/// Runs every repetition (in parallel) and aggregates per grid cell.
/// Output is identical for any thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    cfg.validate()?;
    let cells = cfg.cells();
    let per_rep: Vec<Vec<RawRow>> = (0..cfg.reps).into_par_iter().map(|r| run_rep(cfg, &cells, r)).collect();
    let mut metrics = Vec::with_capacity(cells.len());
    for (k, cell) in cells.iter().enumerate() {
        let rows: Vec<RawRow> = per_rep.iter().map(|r| r[k].clone()).collect();
        let setting = cell.setting();
        let method = cfg.learners[cell.learner].kind.label().to_string();
        metrics.push(match compute_metrics(&setting, &method, &rows) {
            Ok(m) => m,
            Err(_) => MetricsRow::all_failed(&setting, &method, rows.len()),
        });
    }
    let raw = per_rep.into_iter().flatten().collect();
    Ok(Report { metrics, raw })
}

/// Writes `metrics.csv`, `estimates_raw.csv` and `config_echo.json` into `dir`.
pub fn write_results(dir: &Path, cfg: &ExperimentConfig, report: &Report) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("metrics.csv"), emit_table(&report.metrics, TableFormat::Csv)?)?;
    let mut w = csv::Writer::from_path(dir.join("estimates_raw.csv"))?;
    for r in &report.raw {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut echo = serde_json::to_string_pretty(cfg)?;
    echo.push('\n');
    fs::write(dir.join("config_echo.json"), echo)?;
    Ok(())
}
