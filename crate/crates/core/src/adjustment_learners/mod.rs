//! First-stage learners and cross-fitting for covariate adjustment.
//!
//! Each side of the cutoff gets its own out-of-fold model; the adjustment is
//! the average of the two side predictions, `eta = (mu_left + mu_right) / 2`.

pub mod boost;
pub mod lasso;
pub mod stack;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use boost::{boost_fit, BoostModel, BoostParams, Loss};
pub use lasso::{lasso_cv, lasso_fit, lasso_lambda_max, lambda_grid, logistic_lasso_cv, LinearModel, LogisticModel};
pub use stack::{stack_logistic, stack_squared};

use crate::seeding::splitmix64;

/// Probabilities are clipped to `[PROB_CLIP, 1 - PROB_CLIP]` before log loss.
pub const PROB_CLIP: f64 = 1e-6;

pub(crate) const GAP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnerError {
    #[error("non-finite input value")]
    NonFinite,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("empty training data")]
    Empty,
    #[error("feature rows have different lengths")]
    Ragged,
    #[error("logistic targets must be 0 or 1")]
    NotBinary,
    #[error("fold {fold} is empty")]
    EmptyFold { fold: usize },
    #[error("invalid learner spec: {0}")]
    InvalidSpec(String),
}

pub(crate) fn check_finite(values: impl Iterator<Item = f64>) -> Result<(), LearnerError> {
    for v in values {
        if !v.is_finite() {
            return Err(LearnerError::NonFinite);
        }
    }
    Ok(())
}

/// Log loss of one prediction after clipping.
pub fn log_loss_one(y: f64, p: f64) -> f64 {
    let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    NoAdjust,
    LinearCovs,
    LassoLocal,
    LassoGlobal,
    Boosting,
    Stacking,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 6] = [
        LearnerKind::NoAdjust,
        LearnerKind::LinearCovs,
        LearnerKind::LassoLocal,
        LearnerKind::LassoGlobal,
        LearnerKind::Boosting,
        LearnerKind::Stacking,
    ];

    pub fn key(self) -> &'static str {
        match self {
            LearnerKind::NoAdjust => "no_adjust",
            LearnerKind::LinearCovs => "linear_covs",
            LearnerKind::LassoLocal => "lasso_local",
            LearnerKind::LassoGlobal => "lasso_global",
            LearnerKind::Boosting => "boosting",
            LearnerKind::Stacking => "stacking",
        }
    }

    /// Row label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            LearnerKind::NoAdjust => "RDD Without Covs",
            LearnerKind::LinearCovs => "Conventional Linear",
            LearnerKind::LassoLocal => "Local Penalized Linear",
            LearnerKind::LassoGlobal => "Global Penalized Linear",
            LearnerKind::Boosting => "Gradient Boosting",
            LearnerKind::Stacking => "Stacked Combination",
        }
    }

    /// Whether the adjustment is cross-fitted (as opposed to none or pooled linear).
    pub fn is_flexible(self) -> bool {
        !matches!(self, LearnerKind::NoAdjust | LearnerKind::LinearCovs)
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for LearnerKind {
    type Err = LearnerError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.key() == s)
            .ok_or_else(|| LearnerError::InvalidSpec(format!("unknown learner {s:?}")))
    }
}

fn default_folds() -> usize {
    5
}
fn default_lambda_points() -> usize {
    50
}
fn default_lambda_ratio() -> f64 {
    1e-4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    /// Cross-fitting folds.
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_lambda_points")]
    pub lambda_points: usize,
    #[serde(default = "default_lambda_ratio")]
    pub lambda_min_ratio: f64,
    /// Folds of the inner penalty search.
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default)]
    pub boost: BoostParams,
    /// Add the running score to the learner features.
    #[serde(default)]
    pub include_score: bool,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        LearnerSpec {
            kind,
            folds: default_folds(),
            lambda_points: default_lambda_points(),
            lambda_min_ratio: default_lambda_ratio(),
            cv_folds: default_folds(),
            boost: BoostParams::default(),
            include_score: false,
        }
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        if self.folds < 2 {
            return Err(LearnerError::InvalidSpec("folds must be at least 2".into()));
        }
        if self.cv_folds < 2 {
            return Err(LearnerError::InvalidSpec("cv_folds must be at least 2".into()));
        }
        if self.lambda_points == 0 {
            return Err(LearnerError::InvalidSpec("lambda grid must be non-empty".into()));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio <= 1.0) {
            return Err(LearnerError::InvalidSpec("lambda_min_ratio must be in (0, 1]".into()));
        }
        if self.boost.rounds == 0 || self.boost.depth == 0 {
            return Err(LearnerError::InvalidSpec("boosting needs at least one round and depth 1".into()));
        }
        if !(self.boost.shrinkage > 0.0) || !(0.0..1.0).contains(&self.boost.validation_share) {
            return Err(LearnerError::InvalidSpec("bad boosting shrinkage or validation share".into()));
        }
        Ok(())
    }
}

impl Default for LearnerSpec {
    fn default() -> Self {
        LearnerSpec::new(LearnerKind::NoAdjust)
    }
}

/// First-stage fit diagnostics, computed on out-of-fold predictions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub rmse_left: Option<f64>,
    pub rmse_right: Option<f64>,
    pub logloss_left: Option<f64>,
    pub logloss_right: Option<f64>,
}

/// Fold of a unit: a pure function of its id and the seed.
pub fn fold_of(id: u64, seed: u64, folds: usize) -> usize {
    (splitmix64(id ^ splitmix64(seed)) % folds as u64) as usize
}

/// Rows shared by the cross-fitting routines.
#[derive(Clone, Copy, Debug)]
pub struct CrossfitData<'a> {
    pub ids: &'a [u64],
    /// Feature rows.
    pub z: &'a [Vec<f64>],
    /// `true` for units right of the cutoff.
    pub right: &'a [bool],
    /// Rows eligible for training (local learners); `None` means all rows.
    pub window: Option<&'a [bool]>,
}

impl CrossfitData<'_> {
    fn check(&self, target_len: usize) -> Result<(), LearnerError> {
        let n = self.ids.len();
        for len in [self.z.len(), self.right.len(), target_len] {
            if len != n {
                return Err(LearnerError::LengthMismatch { expected: n, got: len });
            }
        }
        if let Some(w) = self.window {
            if w.len() != n {
                return Err(LearnerError::LengthMismatch { expected: n, got: w.len() });
            }
        }
        Ok(())
    }

    fn in_window(&self, i: usize) -> bool {
        self.window.is_none_or(|w| w[i])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossfitOutput {
    /// Out-of-fold adjustment per unit.
    pub eta: Vec<f64>,
    pub mu_left: Vec<f64>,
    pub mu_right: Vec<f64>,
    /// RMSE (regression) or log loss (classification) per side.
    pub loss_left: f64,
    pub loss_right: f64,
}

#[derive(Clone, Debug)]
enum Fitted {
    Const(f64),
    Linear(LinearModel),
    Logistic(LogisticModel),
    Boost(BoostModel),
    Stack(Vec<(f64, Fitted)>),
}

impl Fitted {
    fn predict(&self, row: &[f64]) -> f64 {
        match self {
            Fitted::Const(c) => *c,
            Fitted::Linear(m) => m.predict_row(row),
            Fitted::Logistic(m) => m.predict_proba_row(row),
            Fitted::Boost(m) => m.predict_row(row),
            Fitted::Stack(parts) => parts.iter().map(|(w, f)| w * f.predict(row)).sum(),
        }
    }
}

fn holdout_mask(ids: &[u64], seed: u64, share: f64) -> Vec<bool> {
    ids.iter()
        .map(|&id| (splitmix64(id ^ splitmix64(seed ^ 0x5bd1_e995)) as f64 / u64::MAX as f64) < share)
        .collect()
}

fn fit_model(
    kind: LearnerKind,
    x: &[Vec<f64>],
    y: &[f64],
    ids: &[u64],
    spec: &LearnerSpec,
    seed: u64,
    classify: bool,
) -> Result<Fitted, LearnerError> {
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    if classify && (mean <= 0.0 || mean >= 1.0) {
        return Ok(Fitted::Const(mean.clamp(PROB_CLIP, 1.0 - PROB_CLIP)));
    }
    if n < 2 || x.first().is_none_or(|r| r.is_empty()) {
        return Ok(Fitted::Const(mean));
    }
    Ok(match kind {
        LearnerKind::NoAdjust => Fitted::Const(0.0),
        LearnerKind::LinearCovs => Fitted::Linear(lasso_fit(x, y, 0.0)?),
        LearnerKind::LassoLocal | LearnerKind::LassoGlobal => {
            if classify {
                Fitted::Logistic(logistic_lasso_cv(x, y, spec.lambda_points, spec.lambda_min_ratio, spec.cv_folds)?)
            } else {
                Fitted::Linear(lasso_cv(x, y, spec.lambda_points, spec.lambda_min_ratio, spec.cv_folds)?)
            }
        }
        LearnerKind::Boosting => {
            let hold = holdout_mask(ids, seed, spec.boost.validation_share);
            let hold = if hold.iter().all(|&h| h) || hold.iter().filter(|&&h| !h).count() < 2 {
                None
            } else {
                Some(hold)
            };
            let loss = if classify { Loss::Logistic } else { Loss::Squared };
            Fitted::Boost(boost_fit(x, y, loss, &spec.boost, hold.as_deref())?)
        }
        LearnerKind::Stacking => {
            let hold = holdout_mask(ids, seed ^ 0xa5a5, 0.2);
            let (tr, te): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| !hold[i]);
            if tr.len() < 4 || te.is_empty() {
                return fit_model(LearnerKind::LassoGlobal, x, y, ids, spec, seed, classify);
            }
            let sub = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>, Vec<u64>) {
                (
                    idx.iter().map(|&i| x[i].clone()).collect(),
                    idx.iter().map(|&i| y[i]).collect(),
                    idx.iter().map(|&i| ids[i]).collect(),
                )
            };
            let (xt, yt, it) = sub(&tr);
            let bases = [LearnerKind::LassoGlobal, LearnerKind::Boosting]
                .into_iter()
                .map(|k| fit_model(k, &xt, &yt, &it, spec, seed, classify))
                .collect::<Result<Vec<_>, _>>()?;
            let preds: Vec<Vec<f64>> = bases
                .iter()
                .map(|b| te.iter().map(|&i| b.predict(&x[i])).collect())
                .collect();
            let yh: Vec<f64> = te.iter().map(|&i| y[i]).collect();
            let w = if classify { stack_logistic(&preds, &yh)? } else { stack_squared(&preds, &yh)? };
            Fitted::Stack(w.into_iter().zip(bases).collect())
        }
    })
}

fn features(z: &[Vec<f64>], score: Option<&[f64]>) -> Vec<Vec<f64>> {
    match score {
        Some(s) => z
            .iter()
            .zip(s)
            .map(|(r, &x)| {
                let mut row = r.clone();
                row.push(x);
                row
            })
            .collect(),
        None => z.to_vec(),
    }
}

fn crossfit(
    data: &CrossfitData<'_>,
    target: &[f64],
    spec: &LearnerSpec,
    seed: u64,
    score: Option<&[f64]>,
    classify: bool,
) -> Result<CrossfitOutput, LearnerError> {
    spec.validate()?;
    data.check(target.len())?;
    check_finite(target.iter().copied())?;
    let n = target.len();
    if spec.kind == LearnerKind::NoAdjust {
        return Ok(CrossfitOutput {
            eta: vec![0.0; n],
            mu_left: vec![0.0; n],
            mu_right: vec![0.0; n],
            loss_left: 0.0,
            loss_right: 0.0,
        });
    }
    let feats = features(data.z, if spec.include_score { score } else { None });
    check_finite(feats.iter().flatten().copied())?;
    let k = spec.folds;
    let fold: Vec<usize> = data.ids.iter().map(|&id| fold_of(id, seed, k)).collect();
    for f in 0..k {
        if !fold.contains(&f) {
            return Err(LearnerError::EmptyFold { fold: f });
        }
    }
    let local = spec.kind == LearnerKind::LassoLocal;

    let mut mu = [vec![0.0; n], vec![0.0; n]];
    for f in 0..k {
        for (s, right) in [false, true].into_iter().enumerate() {
            // canonical training order: by unit id
            let mut train: Vec<usize> = (0..n)
                .filter(|&i| fold[i] != f && data.right[i] == right && (!local || data.in_window(i)))
                .collect();
            train.sort_by_key(|&i| (data.ids[i], i));
            if train.is_empty() {
                return Err(LearnerError::Empty);
            }
            let xt: Vec<Vec<f64>> = train.iter().map(|&i| feats[i].clone()).collect();
            let yt: Vec<f64> = train.iter().map(|&i| target[i]).collect();
            let it: Vec<u64> = train.iter().map(|&i| data.ids[i]).collect();
            let model = fit_model(spec.kind, &xt, &yt, &it, spec, seed.wrapping_add(f as u64), classify)?;
            for i in (0..n).filter(|&i| fold[i] == f) {
                let p = model.predict(&feats[i]);
                mu[s][i] = if classify { p.clamp(PROB_CLIP, 1.0 - PROB_CLIP) } else { p };
            }
        }
    }

    let side_loss = |s: usize| {
        let rows: Vec<usize> = (0..n).filter(|&i| data.right[i] == (s == 1) && data.in_window(i)).collect();
        if rows.is_empty() {
            return 0.0;
        }
        let m = rows.len() as f64;
        if classify {
            rows.iter().map(|&i| log_loss_one(target[i], mu[s][i])).sum::<f64>() / m
        } else {
            (rows.iter().map(|&i| (target[i] - mu[s][i]).powi(2)).sum::<f64>() / m).sqrt()
        }
    };
    let loss_left = side_loss(0);
    let loss_right = side_loss(1);
    let [mu_left, mu_right] = mu;
    let eta = mu_left.iter().zip(&mu_right).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(CrossfitOutput { eta, mu_left, mu_right, loss_left, loss_right })
}

/// Out-of-fold outcome adjustment; `loss_*` are side RMSEs.
pub fn crossfit_regression(
    data: &CrossfitData<'_>,
    y: &[f64],
    spec: &LearnerSpec,
    seed: u64,
    score: Option<&[f64]>,
) -> Result<CrossfitOutput, LearnerError> {
    crossfit(data, y, spec, seed, score, false)
}

/// Out-of-fold treatment probabilities; `loss_*` are side log losses.
pub fn crossfit_classifier(
    data: &CrossfitData<'_>,
    d: &[f64],
    spec: &LearnerSpec,
    seed: u64,
    score: Option<&[f64]>,
) -> Result<CrossfitOutput, LearnerError> {
    if d.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(LearnerError::NotBinary);
    }
    crossfit(data, d, spec, seed, score, true)
}

/// `m_i = y_i - eta_i`.
pub fn residualize(y: &[f64], eta: &[f64]) -> Result<Vec<f64>, LearnerError> {
    if y.len() != eta.len() {
        return Err(LearnerError::LengthMismatch { expected: y.len(), got: eta.len() });
    }
    Ok(y.iter().zip(eta).map(|(y, e)| y - e).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residualize_identities() {
        let y = [1.0, 2.0, 4.0];
        assert_eq!(residualize(&y, &y).unwrap(), vec![0.0; 3]);
        assert_eq!(residualize(&y, &[0.0; 3]).unwrap(), y.to_vec());
        assert!(residualize(&y, &[0.0; 2]).is_err());
    }

    #[test]
    fn folds_depend_only_on_id_and_seed() {
        assert_eq!(fold_of(17, 3, 5), fold_of(17, 3, 5));
        let counts = (0..1000u64).fold([0usize; 5], |mut c, id| {
            c[fold_of(id, 9, 5)] += 1;
            c
        });
        assert!(counts.iter().all(|&c| c > 150));
    }

    #[test]
    fn spec_validation() {
        let mut s = LearnerSpec::new(LearnerKind::LassoGlobal);
        assert!(s.validate().is_ok());
        s.folds = 1;
        assert!(s.validate().is_err());
        assert_eq!("boosting".parse::<LearnerKind>().unwrap(), LearnerKind::Boosting);
    }
}
