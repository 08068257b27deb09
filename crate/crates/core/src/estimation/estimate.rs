use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{select_bandwidth, BandwidthSpec, EstimationError, Kernel, RdWeights, Side};
use crate::adjustment_learners::{
    crossfit_classifier, crossfit_regression, log_loss_one, CrossfitData, FitReport, LearnerKind, LearnerSpec,
};

/// Two-sided 95% normal quantile.
pub const Z_975: f64 = 1.959_963_984_540_054;

/// Threshold below which the treatment jump counts as weak identification.
pub const WEAK_JUMP: f64 = 0.01;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    #[default]
    Sharp,
    Fuzzy,
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Design::Sharp => "sharp",
            Design::Fuzzy => "fuzzy",
        })
    }
}

impl FromStr for Design {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sharp" => Ok(Design::Sharp),
            "fuzzy" => Ok(Design::Fuzzy),
            other => Err(format!("unknown design {other:?}")),
        }
    }
}

/// Estimation input: one centered running score with outcome, treatment and covariates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RdSample {
    pub ids: Vec<u64>,
    /// Score centered at the cutoff; `x > 0` is the treated side.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Realized treatment (0/1), required for fuzzy designs.
    pub d: Option<Vec<f64>>,
    /// Covariate rows (may have zero columns).
    pub z: Vec<Vec<f64>>,
}

impl RdSample {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        let n = self.x.len();
        let mut lens = vec![self.ids.len(), self.y.len(), self.z.len()];
        if let Some(d) = &self.d {
            lens.push(d.len());
        }
        if let Some(&bad) = lens.iter().find(|&&l| l != n) {
            return Err(EstimationError::LengthMismatch { expected: n, got: bad });
        }
        let finite = self.x.iter().chain(&self.y).chain(self.z.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(EstimationError::Invalid("non-finite score, outcome or covariate".into()));
        }
        Ok(())
    }

    /// Rows with `keep[i]` set, in their original order.
    pub fn subset(&self, keep: &[bool]) -> RdSample {
        let pick = |v: &[f64]| v.iter().zip(keep).filter(|(_, &k)| k).map(|(x, _)| *x).collect::<Vec<_>>();
        RdSample {
            ids: self.ids.iter().zip(keep).filter(|(_, &k)| k).map(|(x, _)| *x).collect(),
            x: pick(&self.x),
            y: pick(&self.y),
            d: self.d.as_deref().map(pick),
            z: self.z.iter().zip(keep).filter(|(_, &k)| k).map(|(r, _)| r.clone()).collect(),
        }
    }

    /// Same sample with the score shifted so that `c` becomes the cutoff.
    pub fn recentered(&self, c: f64) -> RdSample {
        RdSample { x: self.x.iter().map(|x| x - c).collect(), ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    #[serde(default)]
    pub design: Design,
    #[serde(default)]
    pub kernel: Kernel,
    #[serde(default)]
    pub bandwidth: BandwidthSpec,
    #[serde(default)]
    pub learner: LearnerSpec,
    /// Seed of the cross-fitting folds.
    #[serde(default)]
    pub seed: u64,
}

impl EstimatorSpec {
    pub fn new(design: Design, learner: LearnerKind) -> Self {
        EstimatorSpec {
            design,
            kernel: Kernel::Triangular,
            bandwidth: BandwidthSpec::MseOptimal,
            learner: LearnerSpec::new(learner),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdEstimate {
    /// Bias-corrected estimate.
    pub coef: f64,
    /// Robust standard error of `coef`.
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub coef_conventional: f64,
    pub se_conventional: f64,
    pub h: f64,
    pub b: f64,
    /// Observations with positive kernel weight at `h`.
    pub n_left: usize,
    pub n_right: usize,
    pub first_stage: FitReport,
    pub design: Design,
    pub learner: LearnerKind,
    pub subset: bool,
    /// Bias-corrected outcome jump (the numerator for fuzzy designs).
    pub jump_y: f64,
    /// Bias-corrected treatment jump (fuzzy only).
    pub jump_d: Option<f64>,
}

impl RdEstimate {
    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

/// Adjusted outcome and treatment after the first stage.
struct Adjusted {
    y: Vec<f64>,
    d: Option<Vec<f64>>,
    report: FitReport,
}

fn side_rmse(x: &[f64], resid: &[f64], window: &[bool], side: Side) -> Option<f64> {
    let v: Vec<f64> = (0..x.len())
        .filter(|&i| window[i] && side.contains(x[i]))
        .map(|i| resid[i] * resid[i])
        .collect();
    (!v.is_empty()).then(|| (v.iter().sum::<f64>() / v.len() as f64).sqrt())
}

fn side_logloss(x: &[f64], d: &[f64], p: &[f64], window: &[bool], side: Side) -> Option<f64> {
    let v: Vec<f64> = (0..x.len())
        .filter(|&i| window[i] && side.contains(x[i]))
        .map(|i| log_loss_one(d[i], p[i]))
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Pooled kernel-weighted regression of `v` on side-specific lines and `z`
/// inside the window; returns the covariate coefficients and fitted values.
fn pooled_linear(x: &[f64], v: &[f64], z: &[Vec<f64>], kernel: Kernel, b: f64) -> Result<(Vec<f64>, Vec<f64>), EstimationError> {
    let p = z.first().map_or(0, |r| r.len());
    let k = 4 + p;
    let mut a = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    let row = |i: usize| -> Vec<f64> {
        let r = if x[i] > 0.0 { 1.0 } else { 0.0 };
        let mut out = vec![1.0, r, x[i] / b, r * x[i] / b];
        out.extend_from_slice(&z[i]);
        out
    };
    for i in 0..x.len() {
        let w = kernel.weight(x[i] / b);
        if w <= 0.0 {
            continue;
        }
        let ri = row(i);
        for a_ in 0..k {
            rhs[a_] += w * ri[a_] * v[i];
            for b_ in 0..k {
                a[(a_, b_)] += w * ri[a_] * ri[b_];
            }
        }
    }
    // small ridge keeps collinear covariates solvable
    let trace = (0..k).map(|j| a[(j, j)]).sum::<f64>() / k as f64;
    for j in 4..k {
        a[(j, j)] += 1e-10 * trace.max(1.0);
    }
    let sol = a.lu().solve(&rhs).ok_or(EstimationError::Singular)?;
    let gamma: Vec<f64> = (4..k).map(|j| sol[j]).collect();
    let fitted = (0..x.len()).map(|i| row(i).iter().zip(sol.iter()).map(|(a, b)| a * b).sum()).collect();
    Ok((gamma, fitted))
}

fn adjust(sample: &RdSample, spec: &EstimatorSpec, b: f64) -> Result<Adjusted, EstimationError> {
    let x = &sample.x;
    let window: Vec<bool> = x.iter().map(|v| v.abs() <= b).collect();
    let fuzzy_d = match spec.design {
        Design::Fuzzy => sample.d.as_deref(),
        Design::Sharp => None,
    };
    let has_covs = sample.z.first().is_some_and(|r| !r.is_empty());
    match spec.learner.kind {
        LearnerKind::NoAdjust => Ok(Adjusted { y: sample.y.clone(), d: fuzzy_d.map(<[f64]>::to_vec), report: FitReport::default() }),
        _ if !has_covs && !spec.learner.include_score => {
            Err(EstimationError::Invalid(format!("learner {} needs covariates", spec.learner.kind)))
        }
        LearnerKind::LinearCovs => {
            let (gamma, fitted) = pooled_linear(x, &sample.y, &sample.z, spec.kernel, b)?;
            let resid: Vec<f64> = sample.y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
            let adj = |v: &[f64], g: &[f64]| -> Vec<f64> {
                v.iter().zip(&sample.z).map(|(v, z)| v - z.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()).collect()
            };
            let mut report = FitReport {
                rmse_left: side_rmse(x, &resid, &window, Side::Left),
                rmse_right: side_rmse(x, &resid, &window, Side::Right),
                ..Default::default()
            };
            let d = match fuzzy_d {
                Some(d) => {
                    let (gd, fd) = pooled_linear(x, d, &sample.z, spec.kernel, b)?;
                    report.logloss_left = side_logloss(x, d, &fd, &window, Side::Left);
                    report.logloss_right = side_logloss(x, d, &fd, &window, Side::Right);
                    Some(adj(d, &gd))
                }
                None => None,
            };
            Ok(Adjusted { y: adj(&sample.y, &gamma), d, report })
        }
        _ => {
            let right: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
            let data = CrossfitData { ids: &sample.ids, z: &sample.z, right: &right, window: Some(&window) };
            let out = crossfit_regression(&data, &sample.y, &spec.learner, spec.seed, Some(x))?;
            let mut report = FitReport {
                rmse_left: Some(out.loss_left),
                rmse_right: Some(out.loss_right),
                ..Default::default()
            };
            let y = sample.y.iter().zip(&out.eta).map(|(y, e)| y - e).collect();
            let d = match fuzzy_d {
                Some(d) => {
                    let od = crossfit_classifier(&data, d, &spec.learner, spec.seed ^ 0x0dd5, Some(x))?;
                    report.logloss_left = Some(od.loss_left);
                    report.logloss_right = Some(od.loss_right);
                    Some(d.iter().zip(&od.eta).map(|(d, e)| d - e).collect())
                }
                None => None,
            };
            Ok(Adjusted { y, d, report })
        }
    }
}

/// Sharp or fuzzy estimate according to `spec.design`.
pub fn estimate(sample: &RdSample, spec: &EstimatorSpec) -> Result<RdEstimate, EstimationError> {
    sample.validate()?;
    if spec.design == Design::Fuzzy && sample.d.is_none() {
        return Err(EstimationError::Invalid("fuzzy design needs a treatment column".into()));
    }
    let x = &sample.x;
    let (h, b) = select_bandwidth(x, &sample.y, spec.kernel, spec.bandwidth)?;
    let w = RdWeights::new(x, spec.kernel, h, b)?;
    let adj = adjust(sample, spec, b)?;

    let jy = w.jump_bc(&adj.y);
    let cy = w.jump(&adj.y);
    let rq_y = w.residuals_quad(x, &adj.y);
    let rl_y = w.residuals_lin(x, &adj.y);

    let (coef, var, conv, var_conv, jump_d) = match (&adj.d, spec.design) {
        (Some(d), Design::Fuzzy) => {
            let jd = w.jump_bc(d);
            let cd = w.jump(d);
            if !(jd.abs() > WEAK_JUMP) {
                return Err(EstimationError::WeakIdentification { jump_y: jy, jump_d: jd });
            }
            let tau = jy / jd;
            let rq_d = w.residuals_quad(x, d);
            let e: Vec<f64> = rq_y.iter().zip(&rq_d).map(|(a, b)| a - tau * b).collect();
            let var = w.variance_robust(&e) / (jd * jd);
            let (conv, var_conv) = if cd.abs() > WEAK_JUMP {
                let tc = cy / cd;
                let rl_d = w.residuals_lin(x, d);
                let e: Vec<f64> = rl_y.iter().zip(&rl_d).map(|(a, b)| a - tc * b).collect();
                (tc, w.variance_conventional(&e) / (cd * cd))
            } else {
                (f64::NAN, f64::NAN)
            };
            (tau, var, conv, var_conv, Some(jd))
        }
        _ => (jy, w.variance_robust(&rq_y), cy, w.variance_conventional(&rl_y), None),
    };
    let se = var.max(0.0).sqrt();
    Ok(RdEstimate {
        coef,
        se,
        ci_low: coef - Z_975 * se,
        ci_high: coef + Z_975 * se,
        coef_conventional: conv,
        se_conventional: var_conv.max(0.0).sqrt(),
        h,
        b,
        n_left: w.n_left(),
        n_right: w.n_right(),
        first_stage: adj.report,
        design: spec.design,
        learner: spec.learner.kind,
        subset: false,
        jump_y: jy,
        jump_d,
    })
}

/// Intent-to-treat jump in the outcome.
pub fn sharp_estimate(sample: &RdSample, spec: &EstimatorSpec) -> Result<RdEstimate, EstimationError> {
    estimate(sample, &EstimatorSpec { design: Design::Sharp, ..spec.clone() })
}

/// Wald ratio of the outcome jump to the treatment jump.
pub fn fuzzy_estimate(sample: &RdSample, spec: &EstimatorSpec) -> Result<RdEstimate, EstimationError> {
    estimate(sample, &EstimatorSpec { design: Design::Fuzzy, ..spec.clone() })
}

/// Estimate on the rows kept by `keep` (a mask from `subset_mask`).
pub fn subset_estimate(sample: &RdSample, keep: &[bool], spec: &EstimatorSpec) -> Result<RdEstimate, EstimationError> {
    if keep.len() != sample.len() {
        return Err(EstimationError::LengthMismatch { expected: sample.len(), got: keep.len() });
    }
    let mut est = estimate(&sample.subset(keep), spec)?;
    est.subset = true;
    Ok(est)
}

/// Treatment-assignment direction check near the cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionDiagnostic {
    pub mean_above: f64,
    pub mean_below: f64,
    pub ok: bool,
}

/// Compares the mean of `t` just above and just below the cutoff.
pub fn direction_diagnostic(x: &[f64], t: &[f64], h: f64) -> DirectionDiagnostic {
    let mean = |side: Side| {
        let v: Vec<f64> = x
            .iter()
            .zip(t)
            .filter(|(&xi, _)| side.contains(xi) && xi.abs() < h && xi != 0.0)
            .map(|(_, &ti)| ti)
            .collect();
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let mean_above = mean(Side::Right);
    let mean_below = mean(Side::Left);
    DirectionDiagnostic { mean_above, mean_below, ok: mean_above > mean_below }
}

