use mrd_core::adjustment_learners::boost::mean_loss;
use mrd_core::adjustment_learners::{
    boost_fit, crossfit_classifier, crossfit_regression, lasso_fit, lasso_lambda_max, stack_squared, BoostParams,
    CrossfitData, Loss,
};
use mrd_core::{LearnerKind, LearnerSpec};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Data {
    ids: Vec<u64>,
    z: Vec<Vec<f64>>,
    right: Vec<bool>,
}

fn data(seed: u64, n: usize, p: usize) -> Data {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| r.sample(StandardNormal)).collect()).collect();
    let right = (0..n).map(|_| r.random_bool(0.5)).collect();
    Data { ids: (0..n as u64).map(|i| 1000 + 7 * i).collect(), z, right }
}

impl Data {
    fn view(&self) -> CrossfitData<'_> {
        CrossfitData { ids: &self.ids, z: &self.z, right: &self.right, window: None }
    }
}

const FLEXIBLE: [LearnerKind; 4] =
    [LearnerKind::LassoLocal, LearnerKind::LassoGlobal, LearnerKind::Boosting, LearnerKind::Stacking];

#[test]
fn zero_outcome_gives_zero_adjustment() {
    let d = data(1, 300, 3);
    for kind in FLEXIBLE.into_iter().chain([LearnerKind::NoAdjust]) {
        let out = crossfit_regression(&d.view(), &vec![0.0; 300], &LearnerSpec::new(kind), 9, None).unwrap();
        assert!(out.eta.iter().all(|&e| e == 0.0), "{kind}");
        assert_eq!((out.loss_left, out.loss_right), (0.0, 0.0), "{kind}");
    }
}

#[test]
fn no_adjust_leaves_outcomes_alone() {
    let d = data(2, 200, 2);
    let y: Vec<f64> = d.z.iter().map(|r| r[0] + 1.0).collect();
    let out = crossfit_regression(&d.view(), &y, &LearnerSpec::new(LearnerKind::NoAdjust), 1, None).unwrap();
    assert!(out.eta.iter().all(|&e| e == 0.0));
}

#[test]
fn exact_linear_signal_is_recovered() {
    let d = data(3, 400, 3);
    let y: Vec<f64> = d.z.iter().map(|r| 2.0 * r[0]).collect();
    let spec = LearnerSpec { lambda_min_ratio: 1e-12, ..LearnerSpec::new(LearnerKind::LassoGlobal) };
    let out = crossfit_regression(&d.view(), &y, &spec, 4, None).unwrap();
    assert!(out.loss_left <= 1e-6 && out.loss_right <= 1e-6, "{} {}", out.loss_left, out.loss_right);
}

#[test]
fn always_treated_has_no_log_loss() {
    let d = data(4, 300, 2);
    for kind in FLEXIBLE {
        let out = crossfit_classifier(&d.view(), &vec![1.0; 300], &LearnerSpec::new(kind), 2, None).unwrap();
        assert!(out.eta.iter().all(|&p| p > 0.999), "{kind}");
        assert!(out.loss_left < 1e-5 && out.loss_right < 1e-5, "{kind}");
    }
}

#[test]
fn separable_treatment_is_learned_by_boosting() {
    let d = data(5, 600, 3);
    let t: Vec<f64> = d.z.iter().map(|r| if r[0] > 0.2 { 1.0 } else { 0.0 }).collect();
    let out = crossfit_classifier(&d.view(), &t, &LearnerSpec::new(LearnerKind::Boosting), 3, None).unwrap();
    assert!(out.loss_left < 0.1 && out.loss_right < 0.1, "{} {}", out.loss_left, out.loss_right);
}

#[test]
fn unrelated_treatment_costs_about_ln_two() {
    let d = data(6, 4000, 3);
    let mut r = ChaCha8Rng::seed_from_u64(60);
    let t: Vec<f64> = (0..4000).map(|_| if r.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
    for kind in FLEXIBLE {
        let out = crossfit_classifier(&d.view(), &t, &LearnerSpec::new(kind), 3, None).unwrap();
        for loss in [out.loss_left, out.loss_right] {
            assert!((loss - std::f64::consts::LN_2).abs() < 0.05, "{kind}: {loss}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn predictions_ignore_row_order(seed in any::<u64>()) {
        let d = data(seed, 240, 3);
        let y: Vec<f64> = d.z.iter().map(|r| r[0] - 0.5 * r[1] * r[1]).collect();
        let mut order: Vec<usize> = (0..240).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let shuffled = Data {
            ids: order.iter().map(|&i| d.ids[i]).collect(),
            z: order.iter().map(|&i| d.z[i].clone()).collect(),
            right: order.iter().map(|&i| d.right[i]).collect(),
        };
        let y2: Vec<f64> = order.iter().map(|&i| y[i]).collect();
        for kind in [LearnerKind::LassoGlobal, LearnerKind::Boosting] {
            let spec = LearnerSpec::new(kind);
            let a = crossfit_regression(&d.view(), &y, &spec, 7, None).unwrap();
            let b = crossfit_regression(&shuffled.view(), &y2, &spec, 7, None).unwrap();
            for (pos, &i) in order.iter().enumerate() {
                prop_assert!((a.eta[i] - b.eta[pos]).abs() < 1e-9, "{kind} row {i}");
            }
        }
    }

    #[test]
    fn lasso_kkt(seed in any::<u64>(), frac in 0.01f64..0.9) {
        let d = data(seed, 150, 5);
        let mut r = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let y: Vec<f64> = d.z.iter().map(|z| z[0] - 0.4 * z[3] + r.sample::<f64, _>(StandardNormal)).collect();
        let lambda = frac * lasso_lambda_max(&d.z, &y);
        let model = lasso_fit(&d.z, &y, lambda).unwrap();
        let n = 150.0;
        let resid: Vec<f64> = d.z.iter().zip(&y).map(|(z, y)| y - model.predict_row(z)).collect();
        for j in 0..5 {
            let m = d.z.iter().map(|z| z[j]).sum::<f64>() / n;
            let sd = (d.z.iter().map(|z| (z[j] - m).powi(2)).sum::<f64>() / n).sqrt();
            let g = d.z.iter().zip(&resid).map(|(z, r)| (z[j] - m) / sd * r).sum::<f64>() / n;
            if model.coef[j] == 0.0 {
                prop_assert!(g.abs() <= lambda + 1e-6, "j={j} g={g} lambda={lambda}");
            } else {
                prop_assert!((g - lambda * model.coef[j].signum()).abs() < 1e-5, "j={j} g={g}");
            }
        }
    }

    #[test]
    fn boosting_training_loss_never_rises(seed in any::<u64>()) {
        let d = data(seed, 200, 3);
        let y: Vec<f64> = d.z.iter().map(|z| (z[0] * 2.0).sin() + z[1]).collect();
        let params = BoostParams { rounds: 40, ..BoostParams::default() };
        let model = boost_fit(&d.z, &y, Loss::Squared, &params, None).unwrap();
        let losses: Vec<f64> = (0..=model.n_trees()).map(|k| mean_loss(&model.truncated(k), &d.z, &y)).collect();
        for w in losses.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn stacking_beats_every_single_learner(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let n = 80;
        let y: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
        let k = r.random_range(2..=4);
        let preds: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let noise = r.random_range(0.0..2.0);
                let bias = r.random_range(-1.0..1.0);
                y.iter().map(|v| v + bias + noise * r.sample::<f64, _>(StandardNormal)).collect()
            })
            .collect();
        let w = stack_squared(&preds, &y).unwrap();
        prop_assert!(w.iter().all(|&v| v >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let loss = |wts: &[f64]| -> f64 {
            (0..n).map(|i| (y[i] - (0..k).map(|j| wts[j] * preds[j][i]).sum::<f64>()).powi(2)).sum::<f64>() / n as f64
        };
        let stacked = loss(&w);
        for j in 0..k {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            prop_assert!(stacked <= loss(&e) + 1e-9);
        }
    }
}
