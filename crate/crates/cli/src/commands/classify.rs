use std::path::PathBuf;

use mrd_core::led_dgp::{score_categories, DgpError, Gate};
use mrd_core::unit_classification::{classify_dataset, CategoryCounts};
use mrd_core::{CutoffRule, OperatorPolicy};
use serde::{Deserialize, Serialize};

use super::Context;
use crate::config::{self, load, read_panel, resolve, write_echo};
use crate::error::{config as config_err, data, io, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    #[arg(long, short = 'p')]
    pub panel: Option<PathBuf>,
    /// Score columns bound to I1, I2, ... in order.
    #[arg(long, value_delimiter = ',')]
    pub scores: Option<Vec<String>>,
    /// Assignment rule, e.g. "I1 & I2".
    #[arg(long, short = 't')]
    pub t: Option<String>,
    /// Decision rule over the same atoms.
    #[arg(long, short = 'd')]
    pub d: Option<String>,
    /// Classify against an operator policy instead of an explicit D.
    #[arg(long)]
    pub policy: Option<OperatorPolicy>,
    /// Rule the policy is classified against: assignment, x_d or x_y.
    #[arg(long)]
    pub gate: Option<Gate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    pub panel: Option<PathBuf>,
    #[serde(default = "default_scores")]
    pub scores: Vec<String>,
    #[serde(default)]
    pub t: Option<String>,
    #[serde(default)]
    pub d: Option<String>,
    #[serde(default)]
    pub policy: Option<OperatorPolicy>,
    #[serde(default = "default_gate")]
    pub gate: String,
}

fn default_scores() -> Vec<String> {
    vec!["x_d".into(), "x_y".into(), "x_e".into()]
}
fn default_gate() -> String {
    "assignment".into()
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig { panel: None, scores: default_scores(), t: None, d: None, policy: None, gate: default_gate() }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    rows: usize,
    counts: &'a CategoryCounts,
}

pub fn run(ctx: &Context, args: &Args) -> Result<(), CliError> {
    let loaded = load::<ClassifyConfig>(args.config.as_deref())?;
    let mut cfg = loaded.value;
    if let Some(p) = &cfg.panel {
        cfg.panel = Some(resolve(p, &loaded.base)?);
    }
    if let Some(p) = &args.panel {
        cfg.panel = Some(resolve(p, &std::env::current_dir().map_err(io)?)?);
    }
    if let Some(s) = &args.scores {
        cfg.scores = s.clone();
    }
    if args.t.is_some() {
        cfg.t = args.t.clone();
    }
    if args.d.is_some() {
        cfg.d = args.d.clone();
    }
    if args.policy.is_some() {
        cfg.policy = args.policy;
    }
    if let Some(g) = args.gate {
        cfg.gate = g.to_string();
    }
    let gate: Gate = cfg.gate.parse().map_err(config_err)?;
    if cfg.scores.is_empty() {
        return Err(config_err("scores: at least one score column is required"));
    }
    let path = cfg.panel.clone().ok_or_else(|| config_err("panel: no input panel given"))?;

    let mut panel = read_panel(&path)?;
    let cols = cfg.scores.iter().map(|s| panel.require(s).map_err(data)).collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<Vec<f64>> = (0..panel.len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect();

    let cats = match (&cfg.policy, &cfg.t, &cfg.d) {
        (Some(policy), None, None) => {
            if cfg.scores.len() != 3 {
                return Err(config_err("scores: a policy needs exactly three scores (distance, yield, overall)"));
            }
            let x_r = match policy {
                OperatorPolicy::Reasonable => panel.require("x_r").map_err(data)?.to_vec(),
                _ => Vec::new(),
            };
            score_categories(*policy, gate, &rows, &x_r).map_err(|e| match e {
                DgpError::Classification(c) => config_err(c),
                other => data(other),
            })?
        }
        (None, Some(t), Some(d)) => {
            let dim = cfg.scores.len();
            let t = CutoffRule::parse(t, dim).map_err(|e| config_err(format!("t: {e}")))?;
            let d = CutoffRule::parse(d, dim).map_err(|e| config_err(format!("d: {e}")))?;
            if t.cutoff() != d.cutoff() {
                return Err(config_err("t and d must use the same cutoffs"));
            }
            let (t0, c) = t.normalize_cutoff();
            let (d0, _) = d.normalize_cutoff();
            let centered: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&c).map(|(x, c)| x - c).collect()).collect();
            classify_dataset(&t0, &d0, &centered).map_err(config_err)?.0
        }
        (Some(_), _, _) => return Err(config_err("policy: give either a policy or both t and d, not both")),
        _ => return Err(config_err("t, d: both rules are required unless a policy is given")),
    };
    let counts = CategoryCounts::from_categories(&cats);
    panel.set_categories(cats).map_err(data)?;
    config::write(&ctx.out_dir.join("classified.csv"), panel.to_csv_string().as_bytes())?;
    let mut summary = serde_json::to_string_pretty(&Summary { rows: panel.len(), counts: &counts }).map_err(io)?;
    summary.push('\n');
    config::write(&ctx.out_dir.join("counts.json"), summary.as_bytes())?;
    write_echo(&ctx.out_dir, &cfg)?;
    println!("{counts}");
    Ok(())
}
