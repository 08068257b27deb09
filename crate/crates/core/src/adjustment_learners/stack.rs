//! Convex combination of base-learner predictions.

use nalgebra::{DMatrix, DVector};

use super::{log_loss_one, LearnerError, PROB_CLIP};

fn squared_loss(preds: &[Vec<f64>], w: &[f64], y: &[f64]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(i, &yi)| {
            let f: f64 = preds.iter().zip(w).map(|(p, w)| w * p[i]).sum();
            (yi - f).powi(2)
        })
        .sum::<f64>()
        / y.len() as f64
}

fn mixture_log_loss(preds: &[Vec<f64>], w: &[f64], y: &[f64]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(i, &yi)| {
            let f: f64 = preds.iter().zip(w).map(|(p, w)| w * p[i]).sum();
            log_loss_one(yi, f)
        })
        .sum::<f64>()
        / y.len() as f64
}

fn check(preds: &[Vec<f64>], y: &[f64]) -> Result<(), LearnerError> {
    if preds.is_empty() || y.is_empty() {
        return Err(LearnerError::Empty);
    }
    if let Some(p) = preds.iter().find(|p| p.len() != y.len()) {
        return Err(LearnerError::LengthMismatch { expected: y.len(), got: p.len() });
    }
    super::check_finite(preds.iter().flatten().copied().chain(y.iter().copied()))
}

/// Simplex weights minimizing held-out squared loss.
///
/// Solved exactly: every candidate active set gets its equality-constrained
/// least-squares solution and the best feasible one wins.
pub fn stack_squared(preds: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>, LearnerError> {
    check(preds, y)?;
    let k = preds.len();
    assert!(k <= 16, "too many base learners");
    let mut best: Option<(f64, Vec<f64>)> = None;
    for set in 1u32..(1 << k) {
        let active: Vec<usize> = (0..k).filter(|j| set >> j & 1 == 1).collect();
        let m = active.len();
        let mut a = DMatrix::<f64>::zeros(m + 1, m + 1);
        let mut b = DVector::<f64>::zeros(m + 1);
        for (r, &jr) in active.iter().enumerate() {
            for (c, &jc) in active.iter().enumerate() {
                a[(r, c)] = preds[jr].iter().zip(&preds[jc]).map(|(p, q)| p * q).sum();
            }
            b[r] = preds[jr].iter().zip(y).map(|(p, y)| p * y).sum();
            a[(r, m)] = 1.0;
            a[(m, r)] = 1.0;
        }
        b[m] = 1.0;
        let Some(sol) = a.lu().solve(&b) else { continue };
        if (0..m).any(|r| !(sol[r] >= -1e-12) || !sol[r].is_finite()) {
            continue;
        }
        let mut w = vec![0.0; k];
        for (r, &j) in active.iter().enumerate() {
            w[j] = sol[r].max(0.0);
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        let loss = squared_loss(preds, &w, y);
        if best.as_ref().is_none_or(|(l, _)| loss < *l) {
            best = Some((loss, w));
        }
    }
    Ok(best.expect("vertices are always feasible").1)
}

/// Simplex weights for a mixture of probabilities minimizing held-out log loss.
pub fn stack_logistic(preds: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>, LearnerError> {
    check(preds, y)?;
    let k = preds.len();
    let clipped: Vec<Vec<f64>> = preds
        .iter()
        .map(|p| p.iter().map(|v| v.clamp(PROB_CLIP, 1.0 - PROB_CLIP)).collect())
        .collect();
    let n = y.len() as f64;
    let mut w = vec![1.0 / k as f64; k];
    // exponentiated gradient on the simplex
    let eta = 0.5;
    for _ in 0..500 {
        let mut grad = vec![0.0; k];
        for (i, &yi) in y.iter().enumerate() {
            let f: f64 = clipped.iter().zip(&w).map(|(p, w)| w * p[i]).sum();
            // d/dw_j of -log f is -p_j / f, of -log(1 - f) is p_j / (1 - f)
            let d = if yi > 0.5 { -1.0 / f } else { 1.0 / (1.0 - f) };
            for j in 0..k {
                grad[j] += d * clipped[j][i];
            }
        }
        let mut s = 0.0;
        for j in 0..k {
            w[j] *= (-eta * grad[j] / n).exp();
            s += w[j];
        }
        w.iter_mut().for_each(|v| *v /= s);
    }
    let mut best = (mixture_log_loss(&clipped, &w, y), w);
    for j in 0..k {
        let mut v = vec![0.0; k];
        v[j] = 1.0;
        let l = mixture_log_loss(&clipped, &v, y);
        if l < best.0 {
            best = (l, v);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_learner_dominates() {
        let y: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let noisy: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + if i % 2 == 0 { 0.3 } else { -0.3 }).collect();
        let w = stack_squared(&[noisy, y.clone()], &y).unwrap();
        assert!(w[1] >= 0.99);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn never_worse_than_best_single() {
        let y: Vec<f64> = (0..60).map(|i| ((i * 7) % 11) as f64).collect();
        let a: Vec<f64> = y.iter().map(|v| v * 0.8 + 1.0).collect();
        let b: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + (i % 3) as f64 - 1.0).collect();
        let c = vec![5.0; 60];
        let preds = vec![a, b, c];
        let w = stack_squared(&preds, &y).unwrap();
        let stacked = squared_loss(&preds, &w, &y);
        for j in 0..3 {
            let mut v = vec![0.0; 3];
            v[j] = 1.0;
            assert!(stacked <= squared_loss(&preds, &v, &y) + 1e-9);
        }
    }

    #[test]
    fn logistic_stacking_prefers_informative_learner() {
        let y: Vec<f64> = (0..200).map(|i| (i % 2) as f64).collect();
        let good: Vec<f64> = y.iter().map(|&v| if v > 0.5 { 0.9 } else { 0.1 }).collect();
        let flat = vec![0.5; 200];
        let w = stack_logistic(&[flat, good], &y).unwrap();
        assert!(w[1] > 0.99);
    }
}
