//! Semi-synthetic rework process for production lots of white LEDs.
//!
//! A lot is a cloud of 2D color points. A rework step shifts every point
//! along a fixed conversion direction. The operator sees three scores: the
//! distance of the lot mean to the closest reachable point of the target,
//! the yield improvement of an optimal rework measured on every `m`-th item,
//! and the same improvement on all items. Potential outcomes are the yields
//! of the untouched lot and of a realistic (noisy) rework.
//!
//! All scores in a [`SimPanel`] are centered at their cutoffs.

mod oracle;
mod policy;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use oracle::{
    complier_oracle, defier_correction, itt_contrast, oracle_defier_correction, oracle_effect, Estimand,
};
pub use policy::{decision_bits, operator_decision, policy_categories, score_categories, Gate, OperatorPolicy};

use crate::estimation::RdSample;
use crate::panel::{Panel, PanelError};
use crate::unit_classification::{ClassificationError, UnitCategory};

#[derive(Debug, Error)]
pub enum DgpError {
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Classification(#[from] ClassificationError),
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error("oracle: {0}")]
    Oracle(String),
}

fn invalid(field: &str, message: impl Into<String>) -> DgpError {
    DgpError::Invalid { field: format!("lot.{field}"), message: message.into() }
}

/// Score axis of the rule `T = I_D & I_Y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "x_d")]
    D,
    #[serde(rename = "x_y")]
    Y,
}

impl Axis {
    pub fn column(self) -> &'static str {
        match self {
            Axis::D => "x_d",
            Axis::Y => "x_y",
        }
    }

    /// The other score of the assignment rule.
    pub fn other(self) -> Axis {
        match self {
            Axis::D => Axis::Y,
            Axis::Y => Axis::D,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

impl FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x_d" | "D" | "d" => Ok(Axis::D),
            "x_y" | "Y" | "y" => Ok(Axis::Y),
            other => Err(format!("unknown axis {other:?} (expected x_d or x_y)")),
        }
    }
}

/// Lot geometry, dispersion and rework parameters. Color quantities are in
/// chromaticity units; cutoffs are in score units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LotConfig {
    pub n_items: usize,
    /// Measurement stride: every `m`-th item enters `x_y`.
    pub m: usize,
    pub target: [f64; 2],
    pub spec_halfwidths: [f64; 2],
    /// Mean distance (along the conversion direction) still to go before rework.
    pub mean_offset: f64,
    /// Spread of lot means along the conversion direction.
    pub lot_mean_spread: f64,
    /// Spread of lot means across the conversion direction.
    pub perp_spread: f64,
    pub within_lot_spread: f64,
    /// Log-scale spread of the per-lot dispersion.
    pub spread_log_sd: f64,
    pub conversion_slope: [f64; 2],
    /// Smallest and largest feasible rework shift.
    pub shift_min: f64,
    pub shift_max: f64,
    pub rework_noise_sd: f64,
    pub dispersion_inflation: f64,
    pub c_d: f64,
    pub c_y: f64,
}

impl Default for LotConfig {
    fn default() -> Self {
        LotConfig {
            n_items: 784,
            m: 8,
            target: [0.33, 0.34],
            spec_halfwidths: [0.006, 0.006],
            mean_offset: 0.003,
            lot_mean_spread: 0.004,
            perp_spread: 0.002,
            within_lot_spread: 0.004,
            spread_log_sd: 0.2,
            conversion_slope: [0.6, 0.8],
            shift_min: 0.002,
            shift_max: 0.02,
            rework_noise_sd: 0.0015,
            dispersion_inflation: 1.1,
            c_d: 0.002,
            c_y: 0.02,
        }
    }
}

impl LotConfig {
    pub fn validate(&self) -> Result<(), DgpError> {
        if self.n_items == 0 {
            return Err(invalid("n_items", "must be at least 1"));
        }
        if self.m == 0 || self.m > self.n_items {
            return Err(invalid("m", format!("must be in 1..={}", self.n_items)));
        }
        let finite = [
            ("target", self.target[0]),
            ("target", self.target[1]),
            ("spec_halfwidths", self.spec_halfwidths[0]),
            ("spec_halfwidths", self.spec_halfwidths[1]),
            ("mean_offset", self.mean_offset),
            ("conversion_slope", self.conversion_slope[0]),
            ("conversion_slope", self.conversion_slope[1]),
            ("shift_min", self.shift_min),
            ("shift_max", self.shift_max),
            ("c_d", self.c_d),
            ("c_y", self.c_y),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(invalid(field, "must be finite"));
            }
        }
        let non_negative = [
            ("spec_halfwidths", self.spec_halfwidths[0].min(self.spec_halfwidths[1])),
            ("lot_mean_spread", self.lot_mean_spread),
            ("perp_spread", self.perp_spread),
            ("within_lot_spread", self.within_lot_spread),
            ("spread_log_sd", self.spread_log_sd),
            ("rework_noise_sd", self.rework_noise_sd),
        ];
        for (field, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(field, "must be finite and non-negative"));
            }
        }
        if !(self.dispersion_inflation >= 1.0 && self.dispersion_inflation.is_finite()) {
            return Err(invalid("dispersion_inflation", "must be at least 1"));
        }
        if self.shift_min > self.shift_max {
            return Err(invalid("shift_min", "must not exceed shift_max"));
        }
        let norm = self.conversion_slope[0].hypot(self.conversion_slope[1]);
        if !(norm > 0.0) {
            return Err(invalid("conversion_slope", "must be a non-zero vector"));
        }
        Ok(())
    }

    /// Unit conversion direction.
    pub fn direction(&self) -> [f64; 2] {
        let norm = self.conversion_slope[0].hypot(self.conversion_slope[1]);
        [self.conversion_slope[0] / norm, self.conversion_slope[1] / norm]
    }
}

/// One production lot.
#[derive(Clone, Debug, PartialEq)]
pub struct Lot {
    pub color_points: Vec<[f64; 2]>,
    /// Within-lot dispersion the lot was drawn with.
    pub spread: f64,
}

impl Lot {
    pub fn mean(&self) -> [f64; 2] {
        let n = self.color_points.len() as f64;
        let s = self.color_points.iter().fold([0.0, 0.0], |a, p| [a[0] + p[0], a[1] + p[1]]);
        [s[0] / n, s[1] / n]
    }

    /// Every point moved by `shift` along `dir`.
    pub fn shifted(&self, dir: [f64; 2], shift: f64) -> Lot {
        Lot {
            color_points: self.color_points.iter().map(|p| [p[0] + shift * dir[0], p[1] + shift * dir[1]]).collect(),
            spread: self.spread,
        }
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Draws a lot: mean offset from the target along and across the conversion
/// direction, then isotropic item scatter with a lot-specific spread.
pub fn generate_lot<R: Rng + ?Sized>(rng: &mut R, cfg: &LotConfig) -> Lot {
    let u = cfg.direction();
    let v = [-u[1], u[0]];
    let along = -cfg.mean_offset + cfg.lot_mean_spread * normal(rng);
    let across = cfg.perp_spread * normal(rng);
    let spread = cfg.within_lot_spread * (cfg.spread_log_sd * normal(rng)).exp();
    let center = [
        cfg.target[0] + along * u[0] + across * v[0],
        cfg.target[1] + along * u[1] + across * v[1],
    ];
    let color_points = (0..cfg.n_items)
        .map(|_| [center[0] + spread * normal(rng), center[1] + spread * normal(rng)])
        .collect();
    Lot { color_points, spread }
}

/// Raw distance from the lot mean to the closest reachable point of the
/// target along the conversion direction (positive: shift still needed).
pub fn distance_score(lot: &Lot, cfg: &LotConfig) -> f64 {
    let u = cfg.direction();
    let m = lot.mean();
    (cfg.target[0] - m[0]) * u[0] + (cfg.target[1] - m[1]) * u[1]
}

fn inside(p: &[f64; 2], cfg: &LotConfig) -> bool {
    (p[0] - cfg.target[0]).abs() <= cfg.spec_halfwidths[0] && (p[1] - cfg.target[1]).abs() <= cfg.spec_halfwidths[1]
}

/// Share of items inside the specification box.
pub fn yield_criteria(lot: &Lot, cfg: &LotConfig) -> f64 {
    let (k, n) = count_inside(lot.color_points.iter(), cfg);
    ratio(k as i64, n)
}

fn count_inside<'a>(points: impl Iterator<Item = &'a [f64; 2]>, cfg: &LotConfig) -> (usize, usize) {
    let (mut n, mut k) = (0usize, 0usize);
    for p in points {
        n += 1;
        k += inside(p, cfg) as usize;
    }
    (k, n)
}

fn ratio(k: i64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

/// Yield on the stride-`m` subsample (items `0, m, 2m, ..`).
pub fn measured_yield(lot: &Lot, cfg: &LotConfig) -> f64 {
    let (k, n) = count_inside(lot.color_points.iter().step_by(cfg.m), cfg);
    ratio(k as i64, n)
}

/// Shift in `[shift_min, shift_max]` maximizing the share of items in the
/// box. Among optimal shifts, the one closest to the distance score wins.
pub fn optimal_shift(lot: &Lot, cfg: &LotConfig) -> f64 {
    let u = cfg.direction();
    let (lo, hi) = (cfg.shift_min, cfg.shift_max);
    // each item is inside for a closed interval of shifts
    let mut events: Vec<(f64, i32)> = Vec::with_capacity(2 * lot.color_points.len());
    for p in &lot.color_points {
        let mut a = f64::NEG_INFINITY;
        let mut b = f64::INFINITY;
        for k in 0..2 {
            let d = p[k] - cfg.target[k];
            let w = cfg.spec_halfwidths[k];
            if u[k] == 0.0 {
                if d.abs() > w {
                    a = f64::INFINITY;
                }
            } else {
                let (s1, s2) = ((-w - d) / u[k], (w - d) / u[k]);
                a = a.max(s1.min(s2));
                b = b.min(s1.max(s2));
            }
        }
        let (a, b) = (a.max(lo), b.min(hi));
        if a <= b {
            events.push((a, 1));
            events.push((b, -1));
        }
    }
    let preferred = distance_score(lot, cfg).clamp(lo, hi);
    if events.is_empty() {
        return preferred;
    }
    // starts before ends at equal positions (closed intervals)
    events.sort_by(|x, y| x.0.total_cmp(&y.0).then(y.1.cmp(&x.1)));
    let mut best = 0;
    let mut segments: Vec<(f64, f64)> = Vec::new();
    let mut count = 0;
    for (j, &(pos, delta)) in events.iter().enumerate() {
        count += delta;
        if delta == 1 {
            let end = events[j + 1..].iter().find(|e| e.1 == -1).map_or(hi, |e| e.0);
            if count > best {
                best = count;
                segments.clear();
                segments.push((pos, end));
            } else if count == best {
                segments.push((pos, end));
            }
        }
    }
    // segment nearest to the preferred shift; interior points avoid boundary rounding
    let mut choice = (f64::INFINITY, preferred);
    for &(a, b) in &segments {
        let (dist, s) = if preferred > a && preferred < b {
            (0.0, preferred)
        } else {
            let mid = 0.5 * (a + b);
            ((preferred - mid).abs().min((preferred - a).abs()).min((preferred - b).abs()), mid)
        };
        if dist < choice.0 {
            choice = (dist, s);
        }
    }
    choice.1
}

/// The lot after the yield-maximizing rework.
pub fn optimal_rework(lot: &Lot, cfg: &LotConfig) -> Lot {
    lot.shifted(cfg.direction(), optimal_shift(lot, cfg))
}

/// A realistic rework: the optimal shift plus a random lot-level offset, and
/// extra per-item scatter that inflates the spread by `dispersion_inflation`.
pub fn noisy_rework<R: Rng + ?Sized>(lot: &Lot, rng: &mut R, cfg: &LotConfig) -> Lot {
    let u = cfg.direction();
    let s = optimal_shift(lot, cfg);
    let xi = [cfg.rework_noise_sd * normal(rng), cfg.rework_noise_sd * normal(rng)];
    let jitter = lot.spread * (cfg.dispersion_inflation.powi(2) - 1.0).max(0.0).sqrt();
    let color_points = lot
        .color_points
        .iter()
        .map(|p| {
            let e = [jitter * normal(rng), jitter * normal(rng)];
            [p[0] + s * u[0] + xi[0] + e[0], p[1] + s * u[1] + xi[1] + e[1]]
        })
        .collect();
    Lot { color_points, spread: lot.spread * cfg.dispersion_inflation }
}

/// `(x_y, x_e, x_r)` before centering: measured, overall and residual improvement.
pub fn improvement_scores(lot: &Lot, reworked: &Lot, cfg: &LotConfig) -> (f64, f64, f64) {
    // one rounding per score, so equal rates give an exact zero residual
    let (k1, n) = count_inside(reworked.color_points.iter().step_by(cfg.m), cfg);
    let (k0, _) = count_inside(lot.color_points.iter().step_by(cfg.m), cfg);
    let x_y = ratio(k1 as i64 - k0 as i64, n);
    let (k1, n) = count_inside(reworked.color_points.iter(), cfg);
    let (k0, _) = count_inside(lot.color_points.iter(), cfg);
    let x_e = ratio(k1 as i64 - k0 as i64, n);
    (x_y, x_e, x_e - x_y)
}

/// Lot-level quality statistics used as covariates.
pub const COVARIATE_NAMES: [&str; 6] = ["z_1", "z_2", "z_3", "z_4", "z_5", "z_6"];

fn covariates<R: Rng + ?Sized>(lot: &Lot, cfg: &LotConfig, pre_yield: f64, rng: &mut R) -> Vec<f64> {
    let m = lot.mean();
    let n = lot.color_points.len() as f64;
    let var = lot
        .color_points
        .iter()
        .map(|p| ((p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2)) / 2.0)
        .sum::<f64>()
        / n;
    let box_dist = lot
        .color_points
        .iter()
        .map(|p| {
            let dx = ((p[0] - cfg.target[0]).abs() - cfg.spec_halfwidths[0]).max(0.0);
            let dy = ((p[1] - cfg.target[1]).abs() - cfg.spec_halfwidths[1]).max(0.0);
            dx.hypot(dy)
        })
        .sum::<f64>()
        / n;
    let workload = normal(rng);
    vec![var.sqrt(), pre_yield, box_dist, m[0] - cfg.target[0], m[1] - cfg.target[1], workload]
}

/// One simulated lot, scores centered at the cutoffs.
#[derive(Clone, Debug, PartialEq)]
pub struct LotRecord {
    pub x_d: f64,
    pub x_y: f64,
    pub x_e: f64,
    pub x_r: f64,
    pub t: bool,
    pub d: bool,
    pub y: f64,
    pub y0: f64,
    pub y1: f64,
    pub z: Vec<f64>,
}

/// Random stream of lot `index`; independent of other lots and of threading.
pub fn lot_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn simulate_lot(seed: u64, index: u64, cfg: &LotConfig, policy: OperatorPolicy) -> LotRecord {
    let mut rng = lot_rng(seed, index);
    let lot = generate_lot(&mut rng, cfg);
    let x_d = distance_score(&lot, cfg) - cfg.c_d;
    let opt = optimal_rework(&lot, cfg);
    let (x_y, x_e, x_r) = improvement_scores(&lot, &opt, cfg);
    let (x_y, x_e) = (x_y - cfg.c_y, x_e - cfg.c_y);
    let realized = noisy_rework(&lot, &mut rng, cfg);
    let y0 = yield_criteria(&lot, cfg);
    let y1 = yield_criteria(&realized, cfg);
    let z = covariates(&lot, cfg, y0, &mut rng);
    let i_d = x_d > 0.0;
    let t = i_d && x_y > 0.0;
    let d = operator_decision(policy, i_d, x_y, x_e);
    LotRecord { x_d, x_y, x_e, x_r, t, d, y: if d { y1 } else { y0 }, y0, y1, z }
}

/// Simulated panel; one row per lot.
#[derive(Clone, Debug, PartialEq)]
pub struct SimPanel {
    pub policy: OperatorPolicy,
    pub lot_id: Vec<u64>,
    pub x_d: Vec<f64>,
    pub x_y: Vec<f64>,
    pub x_e: Vec<f64>,
    pub x_r: Vec<f64>,
    pub t: Vec<bool>,
    pub d: Vec<bool>,
    pub y: Vec<f64>,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub z: Vec<Vec<f64>>,
    /// Categories relative to `(T, D)`.
    pub category: Vec<UnitCategory>,
}

pub fn simulate_panel(seed: u64, n_lots: usize, cfg: &LotConfig, policy: OperatorPolicy) -> Result<SimPanel, DgpError> {
    cfg.validate()?;
    if n_lots == 0 {
        return Err(DgpError::Invalid { field: "n_lots".into(), message: "must be at least 1".into() });
    }
    let records: Vec<LotRecord> = (0..n_lots as u64)
        .into_par_iter()
        .map(|i| simulate_lot(seed, i, cfg, policy))
        .collect();
    let mut p = SimPanel {
        policy,
        lot_id: (0..n_lots as u64).collect(),
        x_d: Vec::with_capacity(n_lots),
        x_y: Vec::with_capacity(n_lots),
        x_e: Vec::with_capacity(n_lots),
        x_r: Vec::with_capacity(n_lots),
        t: Vec::with_capacity(n_lots),
        d: Vec::with_capacity(n_lots),
        y: Vec::with_capacity(n_lots),
        y0: Vec::with_capacity(n_lots),
        y1: Vec::with_capacity(n_lots),
        z: Vec::with_capacity(n_lots),
        category: Vec::new(),
    };
    for r in records {
        p.x_d.push(r.x_d);
        p.x_y.push(r.x_y);
        p.x_e.push(r.x_e);
        p.x_r.push(r.x_r);
        p.t.push(r.t);
        p.d.push(r.d);
        p.y.push(r.y);
        p.y0.push(r.y0);
        p.y1.push(r.y1);
        p.z.push(r.z);
    }
    p.category = policy_categories(policy, Gate::Assignment, &p)?;
    Ok(p)
}

fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl SimPanel {
    pub fn len(&self) -> usize {
        self.lot_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lot_id.is_empty()
    }

    /// Centered scores `(x_d, x_y, x_e)` of row `i`.
    pub fn scores(&self, i: usize) -> [f64; 3] {
        [self.x_d[i], self.x_y[i], self.x_e[i]]
    }

    pub fn axis(&self, axis: Axis) -> &[f64] {
        match axis {
            Axis::D => &self.x_d,
            Axis::Y => &self.x_y,
        }
    }

    /// Estimation sample on one axis with the lot covariates.
    pub fn sample(&self, axis: Axis) -> RdSample {
        RdSample {
            ids: self.lot_id.clone(),
            x: self.axis(axis).to_vec(),
            y: self.y.clone(),
            d: Some(self.d.iter().map(|&b| bit(b)).collect()),
            z: self.z.clone(),
        }
    }

    /// Rows where `keep` is true, in order.
    pub fn subset(&self, keep: &[bool]) -> SimPanel {
        fn pick<T: Clone>(v: &[T], keep: &[bool]) -> Vec<T> {
            v.iter().zip(keep).filter(|p| *p.1).map(|p| p.0.clone()).collect()
        }
        SimPanel {
            policy: self.policy,
            lot_id: pick(&self.lot_id, keep),
            x_d: pick(&self.x_d, keep),
            x_y: pick(&self.x_y, keep),
            x_e: pick(&self.x_e, keep),
            x_r: pick(&self.x_r, keep),
            t: pick(&self.t, keep),
            d: pick(&self.d, keep),
            y: pick(&self.y, keep),
            y0: pick(&self.y0, keep),
            y1: pick(&self.y1, keep),
            z: pick(&self.z, keep),
            category: pick(&self.category, keep),
        }
    }

    /// Table with columns `lot_id,x_d,x_y,x_e,x_r,t,d,y,y0,y1,category,z_1..z_p`.
    pub fn to_panel(&self) -> Panel {
        let mut p = Panel::new();
        let bits = |v: &[bool]| v.iter().map(|&b| bit(b)).collect::<Vec<_>>();
        p.push_num("lot_id", self.lot_id.iter().map(|&i| i as f64).collect()).unwrap();
        p.push_num("x_d", self.x_d.clone()).unwrap();
        p.push_num("x_y", self.x_y.clone()).unwrap();
        p.push_num("x_e", self.x_e.clone()).unwrap();
        p.push_num("x_r", self.x_r.clone()).unwrap();
        p.push_num("t", bits(&self.t)).unwrap();
        p.push_num("d", bits(&self.d)).unwrap();
        p.push_num("y", self.y.clone()).unwrap();
        p.push_num("y0", self.y0.clone()).unwrap();
        p.push_num("y1", self.y1.clone()).unwrap();
        p.push_cat(self.category.clone()).unwrap();
        let cols = self.z.first().map_or(0, Vec::len);
        for j in 0..cols {
            p.push_num(&format!("z_{}", j + 1), self.z.iter().map(|r| r[j]).collect()).unwrap();
        }
        p
    }

    /// Reads a panel written by [`SimPanel::to_panel`].
    pub fn from_panel(panel: &Panel, policy: OperatorPolicy) -> Result<Self, DgpError> {
        let col = |n: &str| panel.require(n).map(<[f64]>::to_vec);
        let zs = panel.names_with_prefix("z_");
        let zcols = zs.iter().map(|n| panel.require(n)).collect::<Result<Vec<_>, _>>()?;
        let category = match panel.categories() {
            Some(c) => c.to_vec(),
            None => return Err(PanelError::MissingColumn("category".into()).into()),
        };
        Ok(SimPanel {
            policy,
            lot_id: panel.ids("lot_id")?,
            x_d: col("x_d")?,
            x_y: col("x_y")?,
            x_e: col("x_e")?,
            x_r: col("x_r")?,
            t: panel.bits("t")?,
            d: panel.bits("d")?,
            y: col("y")?,
            y0: col("y0")?,
            y1: col("y1")?,
            z: (0..panel.len()).map(|i| zcols.iter().map(|c| c[i]).collect()).collect(),
            category,
        })
    }
}

#[cfg(test)]
mod tests;
