//! Effects computed from the potential outcomes, which real data never shows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::policy::{operator_decision, policy_categories, Gate};
use super::{Axis, DgpError, SimPanel};
use crate::estimation::{Kernel, LocalPoly, Side};
use crate::unit_classification::UnitCategory;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimand {
    /// Effect among compliers of the axis indicator.
    #[default]
    Complier,
    /// Effect of assignment on the axis, compliance included.
    Itt,
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimand::Complier => "complier",
            Estimand::Itt => "itt",
        })
    }
}

impl FromStr for Estimand {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "complier" => Ok(Estimand::Complier),
            "itt" => Ok(Estimand::Itt),
            other => Err(format!("unknown estimand {other:?} (expected complier or itt)")),
        }
    }
}

/// Mean of the two side-wise local-linear intercepts of `v` at zero, over rows in `keep`.
fn side_average(x: &[f64], v: &[f64], keep: &[bool], kernel: Kernel, h: f64) -> Result<f64, DgpError> {
    let xs: Vec<f64> = x.iter().zip(keep).filter(|p| *p.1).map(|p| *p.0).collect();
    let vs: Vec<f64> = v.iter().zip(keep).filter(|p| *p.1).map(|p| *p.0).collect();
    let mut sum = 0.0;
    for side in [Side::Left, Side::Right] {
        let fit = LocalPoly::fit(&xs, side, kernel, h, 1).map_err(|e| DgpError::Oracle(e.to_string()))?;
        sum += fit.intercept(&vs);
    }
    Ok(0.5 * sum)
}

/// Local-linear effect at zero of `delta = y1 - y0` among the rows flagged as compliers.
pub fn complier_oracle(x: &[f64], delta: &[f64], compliers: &[bool], kernel: Kernel, h: f64) -> Result<f64, DgpError> {
    if x.len() != delta.len() || x.len() != compliers.len() {
        return Err(DgpError::Oracle("length mismatch".into()));
    }
    side_average(x, delta, compliers, kernel, h)
}

/// Per-lot contrast between the two assignment arms of `axis`:
/// `(D | axis on) - (D | axis off)` times `y1 - y0`.
pub fn itt_contrast(panel: &SimPanel, axis: Axis) -> Vec<f64> {
    (0..panel.len())
        .map(|i| {
            let (i_d, x_y, x_e) = (panel.x_d[i] > 0.0, panel.x_y[i], panel.x_e[i]);
            let arm = |on: bool| match axis {
                Axis::D => operator_decision(panel.policy, on, x_y, x_e),
                // the measured score is forced across its cutoff; the overall estimate stays put
                Axis::Y => operator_decision(panel.policy, i_d, if on { 1.0 } else { -1.0 }, x_e),
            };
            let take = arm(true) as i32 - arm(false) as i32;
            take as f64 * (panel.y1[i] - panel.y0[i])
        })
        .collect()
}

/// True effect at the cutoff of `axis`.
pub fn oracle_effect(panel: &SimPanel, axis: Axis, estimand: Estimand, kernel: Kernel, h: f64) -> Result<f64, DgpError> {
    let x = panel.axis(axis);
    match estimand {
        Estimand::Complier => {
            let cats = policy_categories(panel.policy, Gate::Axis(axis), panel)?;
            let keep: Vec<bool> = cats.iter().map(|&c| c == UnitCategory::Complier).collect();
            let delta: Vec<f64> = panel.y1.iter().zip(&panel.y0).map(|(a, b)| a - b).collect();
            complier_oracle(x, &delta, &keep, kernel, h)
        }
        Estimand::Itt => {
            let v = itt_contrast(panel, axis);
            side_average(x, &v, &vec![true; x.len()], kernel, h)
        }
    }
}

/// Defier correction `(p / q) * delta` from arrays.
///
/// `p` and `q` are kernel-weighted shares of defiers and compliers within
/// `h`, and `delta` is the defiers' `y0 - y1` at the cutoff. Few defiers
/// make a local-linear fit impossible; their kernel-weighted mean is used then.
pub fn defier_correction(
    x: &[f64],
    y0_minus_y1: &[f64],
    categories: &[UnitCategory],
    kernel: Kernel,
    h: f64,
) -> Result<f64, DgpError> {
    if x.len() != y0_minus_y1.len() || x.len() != categories.len() {
        return Err(DgpError::Oracle("length mismatch".into()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(DgpError::Oracle(format!("invalid bandwidth {h}")));
    }
    let (mut wp, mut wq, mut wd, mut wdv) = (0.0, 0.0, 0.0, 0.0);
    for ((&xi, &vi), &c) in x.iter().zip(y0_minus_y1).zip(categories) {
        let w = kernel.weight(xi / h);
        match c {
            UnitCategory::Defier => {
                wp += w;
                wd += w;
                wdv += w * vi;
            }
            UnitCategory::Complier => wq += w,
            _ => {}
        }
    }
    if wp == 0.0 {
        return Ok(0.0);
    }
    if wq == 0.0 {
        return Err(DgpError::Oracle("no compliers within the bandwidth".into()));
    }
    let defiers: Vec<bool> = categories.iter().map(|&c| c == UnitCategory::Defier).collect();
    let delta = side_average(x, y0_minus_y1, &defiers, kernel, h).unwrap_or(wdv / wd);
    Ok(wp / wq * delta)
}

/// Defier correction for the compliance pattern of `axis` in a simulated panel.
pub fn oracle_defier_correction(panel: &SimPanel, axis: Axis, kernel: Kernel, h: f64) -> Result<f64, DgpError> {
    let cats = policy_categories(panel.policy, Gate::Axis(axis), panel)?;
    let v: Vec<f64> = panel.y0.iter().zip(&panel.y1).map(|(a, b)| a - b).collect();
    defier_correction(panel.axis(axis), &v, &cats, kernel, h)
}
