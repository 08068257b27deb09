//! Placebo estimates at shifted cutoffs.

use serde::{Deserialize, Serialize};

use super::{estimate, EstimatorSpec, RdEstimate, RdSample, Side};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoCutoffRow {
    pub shift: f64,
    pub estimate: Result<RdEstimate, String>,
}

/// One estimate per shift, ordered by shift.
///
/// A negative shift is estimated on the untreated side only, a positive
/// shift on the treated side only, and a zero shift on the full sample.
pub fn pseudo_cutoff_test(sample: &RdSample, shifts: &[f64], spec: &EstimatorSpec) -> Vec<PseudoCutoffRow> {
    let mut shifts = shifts.to_vec();
    shifts.sort_by(f64::total_cmp);
    shifts
        .into_iter()
        .map(|shift| {
            let sub = if shift < 0.0 {
                let keep: Vec<bool> = sample.x.iter().map(|&x| Side::Left.contains(x)).collect();
                sample.subset(&keep).recentered(shift)
            } else if shift > 0.0 {
                let keep: Vec<bool> = sample.x.iter().map(|&x| Side::Right.contains(x)).collect();
                sample.subset(&keep).recentered(shift)
            } else {
                sample.clone()
            };
            PseudoCutoffRow { shift, estimate: estimate(&sub, spec).map_err(|e| e.to_string()) }
        })
        .collect()
}
