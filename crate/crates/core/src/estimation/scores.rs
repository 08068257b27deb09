//! Scalar reductions of two centered scores.

use crate::rule_algebra::BoolOp;

use super::EstimationError;

/// Binding score: `min` (AND) or `max` (OR) of the normalized centered scores.
/// Positive exactly when the rule assigns treatment.
pub fn binding_score(x1: &[f64], x2: &[f64], scales: (f64, f64), op: BoolOp) -> Result<Vec<f64>, EstimationError> {
    if x1.len() != x2.len() {
        return Err(EstimationError::LengthMismatch { expected: x1.len(), got: x2.len() });
    }
    let (s1, s2) = scales;
    if !(s1 > 0.0 && s2 > 0.0 && s1.is_finite() && s2.is_finite()) {
        return Err(EstimationError::Invalid("binding score normalizers must be positive".into()));
    }
    Ok(x1
        .iter()
        .zip(x2)
        .map(|(a, b)| {
            let (u, v) = (a / s1, b / s2);
            match op {
                BoolOp::And => u.min(v),
                BoolOp::Or => u.max(v),
            }
        })
        .collect())
}

/// Distance to `point`, positive for treated units and negative otherwise.
pub fn euclidean_score(x1: &[f64], x2: &[f64], point: (f64, f64), treated: &[bool]) -> Result<Vec<f64>, EstimationError> {
    if x1.len() != x2.len() || x1.len() != treated.len() {
        return Err(EstimationError::LengthMismatch { expected: x1.len(), got: x2.len().min(treated.len()) });
    }
    Ok(x1
        .iter()
        .zip(x2)
        .zip(treated)
        .map(|((a, b), &t)| {
            let d = (a - point.0).hypot(b - point.1);
            if t {
                d
            } else {
                -d
            }
        })
        .collect())
}

/// Sample standard deviation, used as the default binding normalizer.
pub fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / n as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}
