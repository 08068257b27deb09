//! L1-penalized linear and logistic regression by coordinate descent.

use super::{check_finite, LearnerError};

/// Column-wise standardization; constant columns get scale 0 and are ignored.
#[derive(Clone, Debug)]
pub(crate) struct Standardized {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Standardized columns.
    pub cols: Vec<Vec<f64>>,
}

impl Standardized {
    pub fn new(x: &[Vec<f64>]) -> Self {
        let n = x.len();
        let p = x.first().map_or(0, |r| r.len());
        let mut mean = vec![0.0; p];
        let mut scale = vec![0.0; p];
        let mut cols = vec![vec![0.0; n]; p];
        for j in 0..p {
            let m = x.iter().map(|r| r[j]).sum::<f64>() / n.max(1) as f64;
            let var = x.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n.max(1) as f64;
            let sd = var.sqrt();
            mean[j] = m;
            if sd > 1e-12 * (1.0 + m.abs()) {
                scale[j] = sd;
                for (i, r) in x.iter().enumerate() {
                    cols[j][i] = (r[j] - m) / sd;
                }
            }
        }
        Standardized { mean, scale, cols }
    }
}

/// Linear predictor on the original feature scale.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|r| self.predict_row(r)).collect()
    }

    fn from_standardized(std: &Standardized, b0: f64, beta: &[f64]) -> Self {
        let mut intercept = b0;
        let coef: Vec<f64> = beta
            .iter()
            .zip(&std.scale)
            .zip(&std.mean)
            .map(|((b, s), m)| {
                if *s > 0.0 {
                    intercept -= b * m / s;
                    b / s
                } else {
                    0.0
                }
            })
            .collect();
        LinearModel { intercept, coef }
    }
}

fn soft(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// Convergence rule for [`cd_solve`].
#[derive(Clone, Copy, Debug)]
pub(crate) enum Stop {
    /// Relative duality gap.
    Gap(f64),
    /// Largest curvature-weighted coefficient move, relative to the null
    /// objective; enough for the inner solves of IRLS.
    Change(f64),
}

/// Weighted coordinate descent for
/// `(1 / 2n) sum w_i (y_i - b0 - x_i beta)^2 + lambda |beta|_1`
/// on standardized columns, warm-started from `(b0, beta)`.
pub(crate) fn cd_solve(
    cols: &[Vec<f64>],
    y: &[f64],
    w: Option<&[f64]>,
    lambda: f64,
    b0: &mut f64,
    beta: &mut [f64],
    stop: Stop,
) {
    let n = y.len();
    let nf = n as f64;
    let weight = |i: usize| w.map_or(1.0, |w| w[i]);
    let wsum: f64 = (0..n).map(weight).sum();
    let curv: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().enumerate().map(|(i, v)| weight(i) * v * v).sum::<f64>() / nf)
        .collect();

    let mut r: Vec<f64> = (0..n)
        .map(|i| y[i] - *b0 - cols.iter().zip(beta.iter()).map(|(c, b)| c[i] * b).sum::<f64>())
        .collect();
    let null_obj = {
        let ybar = (0..n).map(|i| weight(i) * y[i]).sum::<f64>() / wsum.max(f64::MIN_POSITIVE);
        (0..n).map(|i| weight(i) * (y[i] - ybar).powi(2)).sum::<f64>() / (2.0 * nf)
    };

    for sweep in 0..100_000 {
        // intercept
        let shift = (0..n).map(|i| weight(i) * r[i]).sum::<f64>() / wsum.max(f64::MIN_POSITIVE);
        *b0 += shift;
        r.iter_mut().for_each(|ri| *ri -= shift);

        let mut max_change = 0.0f64;
        for (j, c) in cols.iter().enumerate() {
            if curv[j] <= 0.0 {
                continue;
            }
            let grad: f64 = c.iter().enumerate().map(|(i, v)| weight(i) * v * r[i]).sum::<f64>() / nf;
            let new = soft(grad + curv[j] * beta[j], lambda) / curv[j];
            let delta = new - beta[j];
            if delta != 0.0 {
                for (ri, v) in r.iter_mut().zip(c) {
                    *ri -= delta * v;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs() * curv[j].sqrt());
            }
        }

        let scale = null_obj.max(f64::MIN_POSITIVE);
        match stop {
            Stop::Change(tol) => {
                if max_change * max_change <= tol * 2.0 * scale {
                    return;
                }
            }
            Stop::Gap(tol) if sweep % 5 == 4 || max_change == 0.0 => {
                if lambda > 0.0 {
                    if duality_gap(cols, &r, w, lambda, beta) <= tol * scale {
                        return;
                    }
                } else if max_change <= 1e-14 * (1.0 + scale.sqrt()) {
                    return;
                }
            }
            Stop::Gap(_) => {}
        }
    }
}

/// Duality gap of the weighted lasso at residual `r` (intercept already optimal).
fn duality_gap(cols: &[Vec<f64>], r: &[f64], w: Option<&[f64]>, lambda: f64, beta: &[f64]) -> f64 {
    let n = r.len() as f64;
    let weight = |i: usize| w.map_or(1.0, |w| w[i]);
    // scaled residual in the weighted geometry
    let wr: Vec<f64> = r.iter().enumerate().map(|(i, ri)| weight(i) * ri).collect();
    let max_corr = cols
        .iter()
        .map(|c| c.iter().zip(&wr).map(|(a, b)| a * b).sum::<f64>().abs() / n)
        .fold(0.0f64, f64::max);
    let s = if max_corr > lambda { lambda / max_corr } else { 1.0 };
    let quad: f64 = r.iter().enumerate().map(|(i, ri)| weight(i) * ri * ri).sum::<f64>() / (2.0 * n);
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let primal = quad + lambda * l1;
    // dual value at theta = s * r: with y = r + X beta (centered),
    // D = (1/n) theta' W y - (1/2n) theta' W theta
    let xb_term: f64 = cols
        .iter()
        .zip(beta)
        .map(|(c, b)| b * c.iter().zip(&wr).map(|(a, r)| a * r).sum::<f64>())
        .sum::<f64>()
        / n;
    let dual = s * (2.0 * quad + xb_term) - s * s * quad;
    (primal - dual).max(0.0)
}

/// Largest useful penalty for (weighted) centered data.
fn lambda_max(cols: &[Vec<f64>], y: &[f64], w: Option<&[f64]>) -> f64 {
    let n = y.len() as f64;
    let weight = |i: usize| w.map_or(1.0, |w| w[i]);
    let wsum: f64 = (0..y.len()).map(weight).sum();
    let ybar = (0..y.len()).map(|i| weight(i) * y[i]).sum::<f64>() / wsum.max(f64::MIN_POSITIVE);
    cols.iter()
        .map(|c| {
            c.iter()
                .enumerate()
                .map(|(i, v)| weight(i) * v * (y[i] - ybar))
                .sum::<f64>()
                .abs()
                / n
        })
        .fold(0.0, f64::max)
}

/// Lasso fit at a single penalty on standardized features.
pub fn lasso_fit(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<LinearModel, LearnerError> {
    check_inputs(x, y)?;
    let std = Standardized::new(x);
    let mut b0 = 0.0;
    let mut beta = vec![0.0; std.cols.len()];
    cd_solve(&std.cols, y, None, lambda, &mut b0, &mut beta, Stop::Gap(super::GAP_TOL));
    Ok(LinearModel::from_standardized(&std, b0, &beta))
}

/// Largest penalty for which some coefficient is non-zero.
pub fn lasso_lambda_max(x: &[Vec<f64>], y: &[f64]) -> f64 {
    let std = Standardized::new(x);
    lambda_max(&std.cols, y, None)
}

/// Log-spaced grid from `lambda_max` down to `ratio * lambda_max`.
pub fn lambda_grid(lmax: f64, points: usize, ratio: f64) -> Vec<f64> {
    if points <= 1 || lmax <= 0.0 {
        return vec![lmax.max(0.0)];
    }
    let lo = (ratio.max(f64::MIN_POSITIVE)).ln();
    (0..points)
        .map(|k| lmax * (lo * k as f64 / (points - 1) as f64).exp())
        .collect()
}

pub(crate) fn check_inputs(x: &[Vec<f64>], y: &[f64]) -> Result<(), LearnerError> {
    if x.len() != y.len() {
        return Err(LearnerError::LengthMismatch { expected: x.len(), got: y.len() });
    }
    if x.is_empty() {
        return Err(LearnerError::Empty);
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(LearnerError::Ragged);
    }
    check_finite(y.iter().copied())?;
    check_finite(x.iter().flat_map(|r| r.iter().copied()))
}

/// Deterministic inner fold of training row `i` (rows are in canonical order).
fn inner_fold(i: usize, k: usize) -> usize {
    i % k
}

/// Lasso with the penalty chosen by `k`-fold CV over a log-spaced path.
pub fn lasso_cv(x: &[Vec<f64>], y: &[f64], points: usize, ratio: f64, k: usize) -> Result<LinearModel, LearnerError> {
    check_inputs(x, y)?;
    let grid = lambda_grid(lasso_lambda_max(x, y), points, ratio);
    let n = y.len();
    let k = k.clamp(2, n.max(2));
    let mut cv_err = vec![0.0; grid.len()];
    if n >= 2 * k {
        for fold in 0..k {
            let (tr, te): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| inner_fold(i, k) != fold);
            let xt: Vec<Vec<f64>> = tr.iter().map(|&i| x[i].clone()).collect();
            let yt: Vec<f64> = tr.iter().map(|&i| y[i]).collect();
            let std = Standardized::new(&xt);
            let mut b0 = 0.0;
            let mut beta = vec![0.0; std.cols.len()];
            for (g, &lam) in grid.iter().enumerate() {
                cd_solve(&std.cols, &yt, None, lam, &mut b0, &mut beta, Stop::Gap(super::GAP_TOL));
                let m = LinearModel::from_standardized(&std, b0, &beta);
                cv_err[g] += te.iter().map(|&i| (y[i] - m.predict_row(&x[i])).powi(2)).sum::<f64>();
            }
        }
    }
    // first minimum along the path (largest penalty among ties)
    let best = cv_err
        .iter()
        .enumerate()
        .fold(0, |b, (g, e)| if *e < cv_err[b] { g } else { b });
    let std = Standardized::new(x);
    let mut b0 = 0.0;
    let mut beta = vec![0.0; std.cols.len()];
    for &lam in &grid[..=best] {
        cd_solve(&std.cols, y, None, lam, &mut b0, &mut beta, Stop::Gap(super::GAP_TOL));
    }
    Ok(LinearModel::from_standardized(&std, b0, &beta))
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// L1-logistic regression by IRLS with weighted coordinate descent.
/// Returns a model on the logit scale.
const IRLS_TOL: f64 = 1e-7;
const PATH_DEV_FLOOR: f64 = 1e-3;
const PATH_DEV_CHANGE: f64 = 1e-5;

fn logistic_fit_std(std: &Standardized, y: &[f64], lambda: f64, b0: &mut f64, beta: &mut [f64]) {
    let n = y.len();
    for _ in 0..50 {
        let eta: Vec<f64> = (0..n)
            .map(|i| *b0 + std.cols.iter().zip(beta.iter()).map(|(c, b)| c[i] * b).sum::<f64>())
            .collect();
        let p: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let w: Vec<f64> = p.iter().map(|&p| (p * (1.0 - p)).max(1e-5)).collect();
        let z: Vec<f64> = (0..n).map(|i| eta[i] + (y[i] - p[i]) / w[i]).collect();
        let old_b0 = *b0;
        let old: Vec<f64> = beta.to_vec();
        cd_solve(&std.cols, &z, Some(&w), lambda, b0, beta, Stop::Change(IRLS_TOL));
        let change = (old_b0 - *b0)
            .abs()
            .max(old.iter().zip(beta.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        if change < 1e-8 {
            break;
        }
    }
}

/// Logistic model (logit-scale linear predictor) with CV-chosen penalty.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    pub linear: LinearModel,
}

impl LogisticModel {
    pub fn predict_proba_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.linear.predict_row(row))
    }

    pub fn constant(p: f64) -> Self {
        let p = p.clamp(super::PROB_CLIP, 1.0 - super::PROB_CLIP);
        LogisticModel { linear: LinearModel { intercept: (p / (1.0 - p)).ln(), coef: Vec::new() } }
    }
}

fn mean_log_loss(std: &Standardized, y: &[f64], b0: f64, beta: &[f64]) -> f64 {
    let n = y.len();
    (0..n)
        .map(|i| {
            let eta = b0 + std.cols.iter().zip(beta).map(|(c, b)| c[i] * b).sum::<f64>();
            super::log_loss_one(y[i], sigmoid(eta))
        })
        .sum::<f64>()
        / n as f64
}

/// Warm-started fits along `grid`. The path stops early once almost all of
/// the deviance is explained or it no longer moves; near-separable data
/// otherwise drives the IRLS weights to zero and the solver crawls.
fn logistic_path(std: &Standardized, y: &[f64], grid: &[f64]) -> Vec<(f64, Vec<f64>)> {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let null = -(mean * mean.ln() + (1.0 - mean) * (1.0 - mean).ln());
    let mut b0 = (mean / (1.0 - mean)).ln();
    let mut beta = vec![0.0; std.cols.len()];
    let mut path = Vec::with_capacity(grid.len());
    let mut prev = null;
    for &lam in grid {
        logistic_fit_std(std, y, lam, &mut b0, &mut beta);
        path.push((b0, beta.clone()));
        let dev = mean_log_loss(std, y, b0, &beta);
        let stalled = path.len() > 1 && prev - dev < PATH_DEV_CHANGE * prev;
        if dev < PATH_DEV_FLOOR * null || stalled {
            break;
        }
        prev = dev;
    }
    path
}

pub fn logistic_lasso_cv(
    x: &[Vec<f64>],
    y: &[f64],
    points: usize,
    ratio: f64,
    k: usize,
) -> Result<LogisticModel, LearnerError> {
    check_inputs(x, y)?;
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    if mean <= 0.0 || mean >= 1.0 {
        return Ok(LogisticModel::constant(mean));
    }
    let std = Standardized::new(x);
    let grid = lambda_grid(lambda_max(&std.cols, y, None), points, ratio);
    let path = logistic_path(&std, y, &grid);
    let grid = &grid[..path.len()];
    let k = k.clamp(2, n.max(2));
    let mut cv_err = vec![0.0; grid.len()];
    if n >= 2 * k {
        for fold in 0..k {
            let (tr, te): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| inner_fold(i, k) != fold);
            let yt: Vec<f64> = tr.iter().map(|&i| y[i]).collect();
            let mt = yt.iter().sum::<f64>() / yt.len() as f64;
            if mt <= 0.0 || mt >= 1.0 {
                continue;
            }
            let xt: Vec<Vec<f64>> = tr.iter().map(|&i| x[i].clone()).collect();
            let st = Standardized::new(&xt);
            let fold_path = logistic_path(&st, &yt, grid);
            for g in 0..grid.len() {
                // a fold path that stopped early keeps its last fit
                let (b0, beta) = &fold_path[g.min(fold_path.len() - 1)];
                let m = LogisticModel { linear: LinearModel::from_standardized(&st, *b0, beta) };
                cv_err[g] += te
                    .iter()
                    .map(|&i| super::log_loss_one(y[i], m.predict_proba_row(&x[i])))
                    .sum::<f64>();
            }
        }
    }
    let best = cv_err
        .iter()
        .enumerate()
        .fold(0, |b, (g, e)| if *e < cv_err[b] { g } else { b });
    let (b0, beta) = &path[best];
    Ok(LogisticModel { linear: LinearModel::from_standardized(&std, *b0, beta) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn design(seed: u64, n: usize, p: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..p).map(|_| rng.sample(StandardNormal)).collect()).collect()
    }

    fn ols(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let p = x[0].len() + 1;
        let mut a = nalgebra::DMatrix::<f64>::zeros(p, p);
        let mut b = nalgebra::DVector::<f64>::zeros(p);
        for (r, &yi) in x.iter().zip(y) {
            let row: Vec<f64> = std::iter::once(1.0).chain(r.iter().copied()).collect();
            for i in 0..p {
                b[i] += row[i] * yi;
                for j in 0..p {
                    a[(i, j)] += row[i] * row[j];
                }
            }
        }
        a.lu().solve(&b).unwrap().iter().copied().collect()
    }

    #[test]
    fn lambda_above_max_zeroes_everything() {
        let x = design(1, 100, 4);
        let y: Vec<f64> = x.iter().map(|r| r[0] - 2.0 * r[2] + 0.5).collect();
        let lmax = lasso_lambda_max(&x, &y);
        let m = lasso_fit(&x, &y, lmax * 1.0001).unwrap();
        assert!(m.coef.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn zero_lambda_is_least_squares() {
        let x = design(2, 80, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y: Vec<f64> = x
            .iter()
            .map(|r| r[0] - 2.0 * r[2] + 0.5 + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let m = lasso_fit(&x, &y, 0.0).unwrap();
        let b = ols(&x, &y);
        assert!((m.intercept - b[0]).abs() < 1e-8);
        for j in 0..5 {
            assert!((m.coef[j] - b[j + 1]).abs() < 1e-8, "{j}");
        }
    }

    #[test]
    fn kkt_conditions_hold() {
        let x = design(3, 200, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y: Vec<f64> = x
            .iter()
            .map(|r| r[1] + 0.3 * r[4] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let std = Standardized::new(&x);
        let lam = 0.2 * lambda_max(&std.cols, &y, None);
        let mut b0 = 0.0;
        let mut beta = vec![0.0; 6];
        cd_solve(&std.cols, &y, None, lam, &mut b0, &mut beta, Stop::Gap(1e-8));
        let r: Vec<f64> = (0..200)
            .map(|i| y[i] - b0 - (0..6).map(|j| std.cols[j][i] * beta[j]).sum::<f64>())
            .collect();
        for j in 0..6 {
            let g = std.cols[j].iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / 200.0;
            if beta[j] == 0.0 {
                assert!(g.abs() <= lam + 1e-6);
            } else {
                assert!((g - lam * beta[j].signum()).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn cv_recovers_exact_linear_signal() {
        let x = design(5, 300, 3);
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0]).collect();
        let m = lasso_cv(&x, &y, 50, 1e-10, 5).unwrap();
        let rmse = (x.iter().zip(&y).map(|(r, y)| (m.predict_row(r) - y).powi(2)).sum::<f64>() / 300.0).sqrt();
        assert!(rmse <= 1e-6, "{rmse}");
    }

    #[test]
    fn logistic_single_class_is_constant() {
        let x = design(6, 50, 2);
        let y = vec![1.0; 50];
        let m = logistic_lasso_cv(&x, &y, 10, 1e-4, 5).unwrap();
        assert!(m.predict_proba_row(&x[0]) > 0.999);
    }

    #[test]
    fn separable_labels_stop_the_path_early() {
        let x = design(7, 400, 3);
        let y: Vec<f64> = x.iter().map(|r| if r[0] > 0.1 { 1.0 } else { 0.0 }).collect();
        let std = Standardized::new(&x);
        let grid = lambda_grid(lambda_max(&std.cols, &y, None), 100, 1e-8);
        let path = logistic_path(&std, &y, &grid);
        assert!(path.len() < grid.len(), "{}", path.len());
        let (b0, beta) = path.last().unwrap();
        assert!(mean_log_loss(&std, &y, *b0, beta) < PATH_DEV_FLOOR * std::f64::consts::LN_2 * 1.01);
        let m = logistic_lasso_cv(&x, &y, 100, 1e-4, 5).unwrap();
        let loss = x.iter().zip(&y).map(|(r, &y)| super::super::log_loss_one(y, m.predict_proba_row(r))).sum::<f64>() / 400.0;
        assert!(loss < 0.05, "{loss}");
    }
}
