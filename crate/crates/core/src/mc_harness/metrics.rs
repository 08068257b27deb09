use serde::{Deserialize, Serialize};

use super::{HarnessError, RawRow};

/// Summary of one estimator over all repetitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub setting: String,
    pub method: String,
    /// Mean of `coef - oracle`.
    pub mean_bias: Option<f64>,
    /// Mean estimated standard error.
    pub se_est_mean: Option<f64>,
    /// Standard deviation of the estimates across repetitions.
    pub se_empirical: Option<f64>,
    /// Share of intervals containing the repetition's own oracle.
    pub coverage: Option<f64>,
    pub rmse_left: Option<f64>,
    pub logloss_left: Option<f64>,
    pub rmse_right: Option<f64>,
    pub logloss_right: Option<f64>,
    /// Share of intervals containing the mean oracle.
    pub coverage_grand_oracle: Option<f64>,
    pub oracle_mean: Option<f64>,
    pub mean_estimate: Option<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
}

impl MetricsRow {
    pub fn all_failed(setting: &str, method: &str, n_failed: usize) -> Self {
        MetricsRow {
            setting: setting.to_string(),
            method: method.to_string(),
            mean_bias: None,
            se_est_mean: None,
            se_empirical: None,
            coverage: None,
            rmse_left: None,
            logloss_left: None,
            rmse_right: None,
            logloss_right: None,
            coverage_grand_oracle: None,
            oracle_mean: None,
            mean_estimate: None,
            n_ok: 0,
            n_failed,
        }
    }
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for x in v {
        s += x;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

/// Aggregates the rows of one grid cell. Failed rows only count toward `n_failed`.
pub fn compute_metrics(setting: &str, method: &str, rows: &[RawRow]) -> Result<MetricsRow, HarnessError> {
    struct Ok_ {
        coef: f64,
        se: f64,
        lo: f64,
        hi: f64,
        oracle: f64,
    }
    let ok: Vec<Ok_> = rows
        .iter()
        .filter(|r| r.ok())
        .filter_map(|r| {
            Some(Ok_ { coef: r.coef?, se: r.se?, lo: r.ci_low?, hi: r.ci_high?, oracle: r.oracle? })
        })
        .collect();
    if ok.is_empty() {
        return Err(HarnessError::AllFailed { setting: setting.into(), method: method.into() });
    }
    let n = ok.len() as f64;
    let mean_estimate = ok.iter().map(|r| r.coef).sum::<f64>() / n;
    let oracle_mean = ok.iter().map(|r| r.oracle).sum::<f64>() / n;
    let se_empirical = (ok.len() > 1).then(|| {
        (ok.iter().map(|r| (r.coef - mean_estimate).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    });
    let covers = |o: f64, r: &Ok_| (r.lo <= o && o <= r.hi) as u8 as f64;
    let ok_rows = || rows.iter().filter(|r| r.ok() && r.coef.is_some() && r.oracle.is_some());
    Ok(MetricsRow {
        setting: setting.into(),
        method: method.into(),
        mean_bias: Some(ok.iter().map(|r| r.coef - r.oracle).sum::<f64>() / n),
        se_est_mean: Some(ok.iter().map(|r| r.se).sum::<f64>() / n),
        se_empirical,
        coverage: Some(ok.iter().map(|r| covers(r.oracle, r)).sum::<f64>() / n),
        rmse_left: mean(ok_rows().filter_map(|r| r.rmse_left)),
        logloss_left: mean(ok_rows().filter_map(|r| r.logloss_left)),
        rmse_right: mean(ok_rows().filter_map(|r| r.rmse_right)),
        logloss_right: mean(ok_rows().filter_map(|r| r.logloss_right)),
        coverage_grand_oracle: Some(ok.iter().map(|r| covers(oracle_mean, r)).sum::<f64>() / n),
        oracle_mean: Some(oracle_mean),
        mean_estimate: Some(mean_estimate),
        n_ok: ok.len(),
        n_failed: rows.len() - ok.len(),
    })
}
