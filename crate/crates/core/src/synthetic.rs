//! Single-score designs with a known effect at zero.
//!
//! `y = 0.5 + slope*x + curvature*x^2 + jump*1[x > 0] + z'beta + noise`
//! with `x ~ U(-1, 1)` and standard normal covariates `z`. The first
//! `signal_covs` covariates carry coefficient `cov_coef`; the rest are noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::estimation::RdSample;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub jump: f64,
    pub slope: f64,
    pub curvature: f64,
    pub noise_sd: f64,
    pub n_covs: usize,
    pub signal_covs: usize,
    pub cov_coef: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig { jump: 0.5, slope: 0.8, curvature: -0.4, noise_sd: 0.3, n_covs: 0, signal_covs: 0, cov_coef: 0.0 }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("jump", self.jump), ("slope", self.slope), ("curvature", self.curvature), ("cov_coef", self.cov_coef)] {
            if !v.is_finite() {
                return Err(format!("synthetic.{name}: must be finite"));
            }
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err("synthetic.noise_sd: must be finite and non-negative".into());
        }
        if self.signal_covs > self.n_covs {
            return Err("synthetic.signal_covs: must not exceed n_covs".into());
        }
        Ok(())
    }

    /// Sharp sample of `n` units; `d = 1[x > 0]`.
    pub fn sample(&self, seed: u64, n: usize) -> RdSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = RdSample { ids: (0..n as u64).collect(), x: Vec::with_capacity(n), y: Vec::with_capacity(n), d: None, z: Vec::with_capacity(n) };
        let mut d = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.random_range(-1.0..1.0);
            let z: Vec<f64> = (0..self.n_covs).map(|_| rng.sample(StandardNormal)).collect();
            let e: f64 = rng.sample(StandardNormal);
            let treated = x > 0.0;
            let signal: f64 = z.iter().take(self.signal_covs).map(|v| self.cov_coef * v).sum();
            let y = 0.5 + self.slope * x + self.curvature * x * x + if treated { self.jump } else { 0.0 } + signal + self.noise_sd * e;
            s.x.push(x);
            s.y.push(y);
            s.z.push(z);
            d.push(if treated { 1.0 } else { 0.0 });
        }
        s.d = Some(d);
        s
    }
}
