//! Plug-in MSE-optimal bandwidth for the local-linear jump.

use serde::{Deserialize, Serialize};

use super::local::LocalPoly;
use super::{EstimationError, Kernel, Side};

/// Ratio of the bias-correction pilot bandwidth to the main bandwidth.
pub const PILOT_RATIO: f64 = 1.5;

/// Minimum number of observations in the initial window.
pub const MIN_WINDOW_OBS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BandwidthSpec {
    Fixed { h: f64 },
    MseOptimal,
}

impl Default for BandwidthSpec {
    fn default() -> Self {
        BandwidthSpec::MseOptimal
    }
}

/// Returns `(h, b)` with `b = 1.5 h`.
pub fn select_bandwidth(x: &[f64], v: &[f64], kernel: Kernel, spec: BandwidthSpec) -> Result<(f64, f64), EstimationError> {
    let h = match spec {
        BandwidthSpec::Fixed { h } => {
            if !(h > 0.0 && h.is_finite()) {
                return Err(EstimationError::InvalidBandwidth(h));
            }
            h
        }
        BandwidthSpec::MseOptimal => mse_optimal(x, v, kernel)?,
    };
    Ok((h, PILOT_RATIO * h))
}

fn mean_var(values: impl Iterator<Item = f64>) -> Option<(f64, f64, usize)> {
    let vals: Vec<f64> = values.collect();
    let n = vals.len();
    if n < 2 {
        return None;
    }
    let m = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some((m, var, n))
}

/// Least-squares fit of `v` on `1, 1[x > 0], x, x^2, x^3`; returns the cubic coefficient.
fn global_cubic(x: &[f64], v: &[f64], scale: f64) -> Option<f64> {
    let k = 5;
    let mut xtx = nalgebra::DMatrix::<f64>::zeros(k, k);
    let mut xtv = nalgebra::DVector::<f64>::zeros(k);
    for (&xi, &vi) in x.iter().zip(v) {
        let u = xi / scale;
        let row = [1.0, if xi > 0.0 { 1.0 } else { 0.0 }, u, u * u, u * u * u];
        for a in 0..k {
            xtv[a] += row[a] * vi;
            for b in 0..k {
                xtx[(a, b)] += row[a] * row[b];
            }
        }
    }
    let sol = xtx.cholesky()?.solve(&xtv);
    Some(sol[4] / scale.powi(3))
}

fn mse_optimal(x: &[f64], v: &[f64], kernel: Kernel) -> Result<f64, EstimationError> {
    if x.len() != v.len() {
        return Err(EstimationError::LengthMismatch { expected: x.len(), got: v.len() });
    }
    let n = x.len();
    let (_, var_x, _) = mean_var(x.iter().copied()).ok_or(EstimationError::DegenerateScore)?;
    let sd = var_x.sqrt();
    if !(sd > 0.0) {
        return Err(EstimationError::DegenerateScore);
    }
    let nf = n as f64;

    // pilot window: density at the cutoff and side variances
    let h1 = 1.84 * sd * nf.powf(-0.2);
    let in_window = |side: Side| {
        x.iter()
            .zip(v)
            .filter(move |(&xi, _)| side.contains(xi) && xi.abs() <= h1)
            .map(|(_, &vi)| vi)
    };
    let (_, var_l, n_l) = mean_var(in_window(Side::Left)).ok_or(EstimationError::DegenerateScore)?;
    let (_, var_r, n_r) = mean_var(in_window(Side::Right)).ok_or(EstimationError::DegenerateScore)?;
    if n_l + n_r < MIN_WINDOW_OBS {
        return Err(EstimationError::TooFewObservations { needed: MIN_WINDOW_OBS, got: n_l + n_r });
    }
    let f0 = (n_l + n_r) as f64 / (2.0 * nf * h1);

    let m3 = 6.0 * global_cubic(x, v, sd).ok_or(EstimationError::DegenerateScore)?;

    // curvature on each side from a uniform-kernel quadratic fit
    let mut curv = [0.0; 2];
    let mut reg = [0.0; 2];
    for (j, (side, var_s)) in [(Side::Left, var_l), (Side::Right, var_r)].into_iter().enumerate() {
        let n_side = x.iter().filter(|&&xi| side.contains(xi)).count() as f64;
        let range = x
            .iter()
            .filter(|&&xi| side.contains(xi))
            .fold(0.0f64, |m, &xi| m.max(xi.abs()));
        let mut h2 = 3.56 * (var_s / (f0 * (m3 * m3).max(f64::MIN_POSITIVE))).powf(1.0 / 7.0) * n_side.powf(-1.0 / 7.0);
        if !h2.is_finite() || h2 > range {
            h2 = range;
        }
        let fit = match LocalPoly::fit(x, side, Kernel::Uniform, h2, 2) {
            Ok(f) => f,
            Err(_) => LocalPoly::fit(x, side, Kernel::Uniform, range, 2)?,
        };
        curv[j] = 2.0 * fit.coef(2, v);
        reg[j] = 720.0 * var_s / (fit.n() as f64 * fit.h.powi(4));
    }

    let denom = f0 * ((curv[1] - curv[0]).powi(2) + reg[0] + reg[1]);
    let h = kernel.mse_constant() * ((var_l + var_r) / denom).powf(0.2) * nf.powf(-0.2);
    let max_abs = x.iter().fold(0.0f64, |m, &xi| m.max(xi.abs()));
    if !h.is_finite() || !(h > 0.0) {
        return Err(EstimationError::DegenerateScore);
    }
    Ok(h.min(max_abs))
}
