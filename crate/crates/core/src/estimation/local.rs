//! Kernel-weighted local polynomial fits on each side of a zero cutoff.
//!
//! Units with `x > 0` form the right (treated) side, `x <= 0` the left side.

use nalgebra::DMatrix;

use super::{EstimationError, Kernel, Side};

/// Linear weights of a one-sided local polynomial fit.
///
/// `coef(r, v)` equals the `r`-th polynomial coefficient (in units of `x`)
/// of the weighted least-squares fit of `v` on `1, x, .., x^degree`.
#[derive(Clone, Debug)]
pub struct LocalPoly {
    pub side: Side,
    pub degree: usize,
    pub h: f64,
    /// Rows with positive kernel weight on this side.
    pub idx: Vec<usize>,
    /// `coef_weights[r][j]` multiplies `v[idx[j]]` in coefficient `r`.
    pub coef_weights: Vec<Vec<f64>>,
}

impl LocalPoly {
    pub fn fit(x: &[f64], side: Side, kernel: Kernel, h: f64, degree: usize) -> Result<Self, EstimationError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(EstimationError::InvalidBandwidth(h));
        }
        let mut idx = Vec::new();
        let mut w = Vec::new();
        let mut u = Vec::new();
        for (i, &xi) in x.iter().enumerate() {
            if side.contains(xi) {
                let wi = kernel.weight(xi / h);
                if wi > 0.0 {
                    idx.push(i);
                    w.push(wi);
                    u.push(xi / h);
                }
            }
        }
        let mut distinct = u.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < degree + 1 {
            return Err(EstimationError::InsufficientSupport { side, needed: degree + 1, got: distinct.len() });
        }

        // moment matrix on the rescaled score u = x / h
        let k = degree + 1;
        let mut s = DMatrix::<f64>::zeros(k, k);
        for (&wi, &ui) in w.iter().zip(&u) {
            let mut pow = vec![1.0; 2 * k - 1];
            for p in 1..pow.len() {
                pow[p] = pow[p - 1] * ui;
            }
            for a in 0..k {
                for b in 0..k {
                    s[(a, b)] += wi * pow[a + b];
                }
            }
        }
        let inv = s
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or(EstimationError::Singular)?;

        let mut coef_weights = vec![vec![0.0; idx.len()]; k];
        for (j, (&wi, &ui)) in w.iter().zip(&u).enumerate() {
            let mut pow = 1.0;
            let mut basis = vec![0.0; k];
            for bj in basis.iter_mut() {
                *bj = pow;
                pow *= ui;
            }
            for (r, row) in coef_weights.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (c, bc) in basis.iter().enumerate() {
                    acc += inv[(r, c)] * bc;
                }
                row[j] = wi * acc / h.powi(r as i32);
            }
        }
        Ok(LocalPoly { side, degree, h, idx, coef_weights })
    }

    pub fn n(&self) -> usize {
        self.idx.len()
    }

    pub fn coef(&self, r: usize, v: &[f64]) -> f64 {
        self.coef_weights[r].iter().zip(&self.idx).map(|(w, &i)| w * v[i]).sum()
    }

    pub fn intercept(&self, v: &[f64]) -> f64 {
        self.coef(0, v)
    }

    /// Fitted polynomial at `x`.
    pub fn predict(&self, coefs: &[f64], x: f64) -> f64 {
        coefs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn coefs(&self, v: &[f64]) -> Vec<f64> {
        (0..=self.degree).map(|r| self.coef(r, v)).collect()
    }

    /// Residuals `v_i - fit(x_i)` for the rows of this fit, aligned with `idx`.
    pub fn residuals(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let c = self.coefs(v);
        self.idx.iter().map(|&i| v[i] - self.predict(&c, x[i])).collect()
    }
}

/// Conventional local-linear jump at zero with its weights.
#[derive(Clone, Debug)]
pub struct LinearJump {
    pub jump: f64,
    pub left_intercept: f64,
    pub right_intercept: f64,
    pub left: LocalPoly,
    pub right: LocalPoly,
    /// HC variance of the jump (residuals from the same fits).
    pub variance: f64,
}

/// `intercept_right - intercept_left` of side-wise local-linear fits of `v` on `x`.
pub fn local_linear_jump(x: &[f64], v: &[f64], kernel: Kernel, h: f64) -> Result<LinearJump, EstimationError> {
    if x.len() != v.len() {
        return Err(EstimationError::LengthMismatch { expected: x.len(), got: v.len() });
    }
    let left = LocalPoly::fit(x, Side::Left, kernel, h, 1)?;
    let right = LocalPoly::fit(x, Side::Right, kernel, h, 1)?;
    let li = left.intercept(v);
    let ri = right.intercept(v);
    let mut variance = 0.0;
    for fit in [&left, &right] {
        let res = fit.residuals(x, v);
        variance += hc_sum(&fit.coef_weights[0], &res, fit.n(), 2);
    }
    Ok(LinearJump { jump: ri - li, left_intercept: li, right_intercept: ri, left, right, variance })
}

/// `n / (n - k) * sum w^2 e^2`, falling back to the plain sum when `n <= k`.
pub(crate) fn hc_sum(w: &[f64], e: &[f64], n: usize, k: usize) -> f64 {
    let s: f64 = w.iter().zip(e).map(|(w, e)| w * w * e * e).sum();
    if n > k {
        s * n as f64 / (n - k) as f64
    } else {
        s
    }
}

/// Conventional and bias-corrected jump weights over the full sample.
///
/// The bias-corrected weights subtract the leading local-linear bias,
/// `(sum_j l_j x_j^2) * beta_2`, with `beta_2` from a local-quadratic fit at
/// the pilot bandwidth `b`.
#[derive(Clone, Debug)]
pub struct RdWeights {
    pub kernel: Kernel,
    pub h: f64,
    pub b: f64,
    /// Signed conventional weights (right positive, left negative).
    pub ell: Vec<f64>,
    /// Signed bias-corrected weights.
    pub omega: Vec<f64>,
    pub lin: [LocalPoly; 2],
    pub quad: [LocalPoly; 2],
}

impl RdWeights {
    pub fn new(x: &[f64], kernel: Kernel, h: f64, b: f64) -> Result<Self, EstimationError> {
        if !(b >= h) {
            return Err(EstimationError::InvalidBandwidth(b));
        }
        let n = x.len();
        let mut ell = vec![0.0; n];
        let mut omega = vec![0.0; n];
        let mut lins = Vec::with_capacity(2);
        let mut quads = Vec::with_capacity(2);
        for side in [Side::Left, Side::Right] {
            let sign = side.sign();
            let lin = LocalPoly::fit(x, side, kernel, h, 1)?;
            let quad = LocalPoly::fit(x, side, kernel, b, 2)?;
            let bias_factor: f64 = lin.coef_weights[0]
                .iter()
                .zip(&lin.idx)
                .map(|(w, &i)| w * x[i] * x[i])
                .sum();
            for (w, &i) in lin.coef_weights[0].iter().zip(&lin.idx) {
                ell[i] += sign * w;
                omega[i] += sign * w;
            }
            for (q, &i) in quad.coef_weights[2].iter().zip(&quad.idx) {
                omega[i] -= sign * bias_factor * q;
            }
            lins.push(lin);
            quads.push(quad);
        }
        let lin: [LocalPoly; 2] = lins.try_into().expect("two sides");
        let quad: [LocalPoly; 2] = quads.try_into().expect("two sides");
        Ok(RdWeights { kernel, h, b, ell, omega, lin, quad })
    }

    pub fn n_left(&self) -> usize {
        self.lin[0].n()
    }

    pub fn n_right(&self) -> usize {
        self.lin[1].n()
    }

    pub fn jump(&self, v: &[f64]) -> f64 {
        self.ell.iter().zip(v).map(|(w, v)| w * v).sum()
    }

    pub fn jump_bc(&self, v: &[f64]) -> f64 {
        self.omega.iter().zip(v).map(|(w, v)| w * v).sum()
    }

    /// Full-length residuals of the side-wise linear fits at `h` (zero outside).
    pub fn residuals_lin(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        scatter_residuals(&self.lin, x, v)
    }

    /// Full-length residuals of the side-wise quadratic fits at `b` (zero outside).
    pub fn residuals_quad(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        scatter_residuals(&self.quad, x, v)
    }

    /// HC variance of `sum ell_i v_i` given full-length residuals.
    pub fn variance_conventional(&self, resid: &[f64]) -> f64 {
        side_hc(&self.lin, &self.ell, resid, 2)
    }

    /// HC variance of `sum omega_i v_i` given full-length residuals.
    pub fn variance_robust(&self, resid: &[f64]) -> f64 {
        side_hc(&self.quad, &self.omega, resid, 3)
    }
}

fn scatter_residuals(fits: &[LocalPoly; 2], x: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for fit in fits {
        for (r, &i) in fit.residuals(x, v).iter().zip(&fit.idx) {
            out[i] = *r;
        }
    }
    out
}

fn side_hc(fits: &[LocalPoly; 2], w: &[f64], resid: &[f64], k: usize) -> f64 {
    fits.iter()
        .map(|fit| {
            let ws: Vec<f64> = fit.idx.iter().map(|&i| w[i]).collect();
            let es: Vec<f64> = fit.idx.iter().map(|&i| resid[i]).collect();
            hc_sum(&ws, &es, fit.n(), k)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / n as f64).collect()
    }

    #[test]
    fn constants_give_zero_jump() {
        let x = grid(200);
        let v = vec![3.0; 200];
        for k in Kernel::ALL {
            let j = local_linear_jump(&x, &v, k, 0.5).unwrap();
            assert!(j.jump.abs() < 1e-12);
        }
    }

    #[test]
    fn piecewise_linear_jump_is_exact() {
        let x = grid(300);
        let v: Vec<f64> = x.iter().map(|&x| if x > 0.0 { 0.5 } else { 0.0 } + x).collect();
        for k in Kernel::ALL {
            for h in [0.05, 0.3, 1.0, 5.0] {
                let j = local_linear_jump(&x, &v, k, h).unwrap();
                assert!((j.jump - 0.5).abs() < 1e-10, "{k} {h}");
            }
        }
    }

    #[test]
    fn one_sided_data_errors() {
        let x = vec![0.1, 0.2, 0.3];
        assert!(matches!(
            local_linear_jump(&x, &[1.0; 3], Kernel::Triangular, 1.0),
            Err(EstimationError::InsufficientSupport { side: Side::Left, .. })
        ));
    }

    #[test]
    fn bias_correction_removes_quadratic_bias() {
        let x = grid(400);
        let v: Vec<f64> = x
            .iter()
            .map(|&x| if x > 0.0 { 0.25 + 2.0 * x * x } else { -x * x } - x)
            .collect();
        let w = RdWeights::new(&x, Kernel::Triangular, 0.4, 0.6).unwrap();
        assert!((w.jump(&v) - 0.25).abs() > 1e-4);
        assert!((w.jump_bc(&v) - 0.25).abs() < 1e-10);
        let ones = vec![1.0; 400];
        assert!(w.jump_bc(&ones).abs() < 1e-12);
    }
}
