use super::*;
use crate::estimation::Kernel;

fn quiet() -> LotConfig {
    LotConfig { lot_mean_spread: 0.0, perp_spread: 0.0, within_lot_spread: 0.0, spread_log_sd: 0.0, ..LotConfig::default() }
}

fn lot_at(points: Vec<[f64; 2]>) -> Lot {
    Lot { color_points: points, spread: 0.0 }
}

#[test]
fn degenerate_spread_gives_identical_points() {
    let lot = generate_lot(&mut lot_rng(1, 0), &quiet());
    let first = lot.color_points[0];
    assert!(lot.color_points.iter().all(|p| *p == first));
    assert_eq!(lot.color_points.len(), 784);
}

#[test]
fn generation_is_deterministic() {
    let cfg = LotConfig::default();
    assert_eq!(generate_lot(&mut lot_rng(9, 3), &cfg), generate_lot(&mut lot_rng(9, 3), &cfg));
    assert_ne!(generate_lot(&mut lot_rng(9, 3), &cfg), generate_lot(&mut lot_rng(9, 4), &cfg));
}

#[test]
fn sample_mean_within_clt_bound() {
    let cfg = LotConfig { n_items: 100_000, lot_mean_spread: 0.0, perp_spread: 0.0, spread_log_sd: 0.0, ..LotConfig::default() };
    let lot = generate_lot(&mut lot_rng(5, 0), &cfg);
    let u = cfg.direction();
    let expected = [cfg.target[0] - cfg.mean_offset * u[0], cfg.target[1] - cfg.mean_offset * u[1]];
    let m = lot.mean();
    let bound = 3.0 * cfg.within_lot_spread / (cfg.n_items as f64).sqrt();
    for k in 0..2 {
        assert!((m[k] - expected[k]).abs() < bound, "{k}: {} vs {}", m[k], expected[k]);
    }
}

#[test]
fn distance_score_geometry() {
    let cfg = LotConfig::default();
    let u = cfg.direction();
    let v = [-u[1], u[0]];
    // mean on the target's reachable point: zero, whatever the perpendicular offset
    let at_cp = lot_at(vec![[cfg.target[0] + 0.01 * v[0], cfg.target[1] + 0.01 * v[1]]]);
    assert!(distance_score(&at_cp, &cfg).abs() < 1e-15);
    let mut last = f64::NEG_INFINITY;
    for delta in [0.001, 0.002, 0.005, 0.01] {
        let lot = lot_at(vec![[cfg.target[0] - delta * u[0], cfg.target[1] - delta * u[1]]]);
        let s = distance_score(&lot, &cfg);
        assert!((s - delta).abs() < 1e-15);
        assert!(s > last);
        last = s;
    }
}

#[test]
fn yield_counts_items_in_the_box() {
    let cfg = LotConfig::default();
    let inside = cfg.target;
    let outside = [cfg.target[0] + 1.0, cfg.target[1]];
    assert_eq!(yield_criteria(&lot_at(vec![inside; 4]), &cfg), 1.0);
    assert_eq!(yield_criteria(&lot_at(vec![outside; 4]), &cfg), 0.0);
    assert_eq!(yield_criteria(&lot_at(vec![inside, outside, inside, outside]), &cfg), 0.5);
}

#[test]
fn noise_free_rework_is_optimal_rework() {
    let cfg = LotConfig { rework_noise_sd: 0.0, dispersion_inflation: 1.0, ..LotConfig::default() };
    for i in 0..20 {
        let lot = generate_lot(&mut lot_rng(2, i), &cfg);
        let noisy = noisy_rework(&lot, &mut lot_rng(77, i), &cfg);
        assert_eq!(noisy.color_points, optimal_rework(&lot, &cfg).color_points);
    }
}

#[test]
fn noisy_rework_is_reproducible() {
    let cfg = LotConfig::default();
    let lot = generate_lot(&mut lot_rng(2, 0), &cfg);
    assert_eq!(noisy_rework(&lot, &mut lot_rng(3, 0), &cfg), noisy_rework(&lot, &mut lot_rng(3, 0), &cfg));
}

#[test]
fn optimal_shift_beats_a_line_search() {
    let cfg = LotConfig { shift_min: -0.05, shift_max: 0.05, ..LotConfig::default() };
    let u = cfg.direction();
    for i in 0..30 {
        let lot = generate_lot(&mut lot_rng(11, i), &cfg);
        let best = yield_criteria(&optimal_rework(&lot, &cfg), &cfg);
        assert!(best >= yield_criteria(&lot, &cfg));
        for j in 0..=1000 {
            let s = -0.05 + 0.1 * j as f64 / 1000.0;
            assert!(best >= yield_criteria(&lot.shifted(u, s), &cfg), "lot {i} shift {s}");
        }
    }
}

#[test]
fn improvement_score_identities() {
    let cfg = LotConfig { m: 1, ..LotConfig::default() };
    let lot = generate_lot(&mut lot_rng(4, 0), &cfg);
    let opt = optimal_rework(&lot, &cfg);
    let (x_y, x_e, x_r) = improvement_scores(&lot, &opt, &cfg);
    assert_eq!(x_y, x_e);
    assert_eq!(x_r, 0.0);
    let cfg = LotConfig::default();
    assert_eq!(improvement_scores(&lot, &lot, &cfg), (0.0, 0.0, 0.0));
}

#[test]
fn stride_subsample_is_unbiased() {
    let cfg = LotConfig::default();
    let n = 10_000;
    let xr: Vec<f64> = (0..n)
        .map(|i| {
            let mut rng = lot_rng(21, i);
            let lot = generate_lot(&mut rng, &cfg);
            improvement_scores(&lot, &optimal_rework(&lot, &cfg), &cfg).2
        })
        .collect();
    let mean = xr.iter().sum::<f64>() / n as f64;
    let sd = (xr.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    assert!(mean.abs() < 3.0 * sd / (n as f64).sqrt(), "mean {mean} sd {sd}");
}

#[test]
fn operator_decisions() {
    use OperatorPolicy::*;
    for &(i_d, x_y, x_e) in &[(true, 0.1, 0.2), (true, -0.1, 0.2), (false, 0.1, 0.1), (true, 0.1, -0.2)] {
        assert_eq!(operator_decision(Acknowledging, i_d, x_y, x_e), i_d && x_y > 0.0);
    }
    assert!(!operator_decision(Cautious, true, 0.1, -0.01));
    // takes treatment although the assignment says no
    let (x_y, x_e) = (-0.01, 0.02);
    assert!(operator_decision(Reasonable, true, x_y, x_e));
    assert!(!operator_decision(Acknowledging, true, x_y, x_e));
}

#[test]
fn config_validation_reports_field_paths() {
    let bad = LotConfig { m: 0, ..LotConfig::default() };
    assert!(bad.validate().unwrap_err().to_string().contains("lot.m"));
    let bad = LotConfig { within_lot_spread: -1.0, ..LotConfig::default() };
    assert!(bad.validate().unwrap_err().to_string().contains("lot.within_lot_spread"));
    let bad = LotConfig { n_items: 0, ..LotConfig::default() };
    assert!(bad.validate().unwrap_err().to_string().contains("lot.n_items"));
    assert!(simulate_panel(1, 0, &LotConfig::default(), OperatorPolicy::Cautious).is_err());
}

fn panel(policy: OperatorPolicy) -> SimPanel {
    simulate_panel(42, 400, &LotConfig::default(), policy).unwrap()
}

#[test]
fn panel_invariants() {
    for policy in OperatorPolicy::ALL {
        let p = panel(policy);
        for i in 0..p.len() {
            assert_eq!(p.y[i], if p.d[i] { p.y1[i] } else { p.y0[i] });
            assert!((0.0..=1.0).contains(&p.y[i]));
            assert!((0.0..=1.0).contains(&p.y0[i]) && (0.0..=1.0).contains(&p.y1[i]));
            assert!((p.x_e[i] - (p.x_y[i] + p.x_r[i])).abs() < 1e-12);
            assert_eq!(p.t[i], p.x_d[i] > 0.0 && p.x_y[i] > 0.0);
            assert_eq!(p.z[i].len(), COVARIATE_NAMES.len());
        }
    }
}

#[test]
fn acknowledging_panel_is_sharp_and_all_compliers() {
    let p = panel(OperatorPolicy::Acknowledging);
    assert_eq!(p.d, p.t);
    assert!(p.category.iter().all(|&c| c == UnitCategory::Complier));
}

#[test]
fn cautious_panel_is_one_sided_with_closed_form_categories() {
    let p = panel(OperatorPolicy::Cautious);
    for i in 0..p.len() {
        assert!(p.d[i] <= p.t[i]);
        let expected = if p.x_e[i] > 0.0 { UnitCategory::Complier } else { UnitCategory::Nevertaker };
        assert_eq!(p.category[i], expected, "row {i}");
    }
    let axis_d = policy_categories(OperatorPolicy::Cautious, Gate::Axis(Axis::D), &p).unwrap();
    for i in 0..p.len() {
        let complier = p.x_e[i] > 0.0 && p.x_y[i] > 0.0;
        assert_eq!(axis_d[i] == UnitCategory::Complier, complier, "row {i}");
    }
}

#[test]
fn reasonable_operator_is_indecisive_off_the_diagonal() {
    let p = panel(OperatorPolicy::Reasonable);
    for i in 0..p.len() {
        let expected = if p.x_r[i] == 0.0 { UnitCategory::Complier } else { UnitCategory::Indecisive };
        assert_eq!(p.category[i], expected, "row {i}");
    }
}

#[test]
fn panel_is_seed_deterministic_and_prefix_stable() {
    let cfg = LotConfig::default();
    let a = simulate_panel(7, 50, &cfg, OperatorPolicy::Cautious).unwrap();
    let b = simulate_panel(7, 50, &cfg, OperatorPolicy::Cautious).unwrap();
    assert_eq!(a, b);
    let c = simulate_panel(7, 80, &cfg, OperatorPolicy::Cautious).unwrap();
    assert_eq!(a.x_d[..], c.x_d[..50]);
    assert_eq!(a.y[..], c.y[..50]);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let d = pool.install(|| simulate_panel(7, 50, &cfg, OperatorPolicy::Cautious).unwrap());
    assert_eq!(a, d);
}

#[test]
fn panel_csv_round_trip() {
    let p = panel(OperatorPolicy::Cautious);
    let table = p.to_panel();
    let text = table.to_csv_string();
    assert!(text.starts_with("lot_id,x_d,x_y,x_e,x_r,t,d,y,y0,y1,category,z_1,z_2,z_3,z_4,z_5,z_6\n"));
    let back = SimPanel::from_panel(&Panel::read_csv(text.as_bytes()).unwrap(), OperatorPolicy::Cautious).unwrap();
    assert_eq!(back, p);
}

fn synthetic(delta: impl Fn(f64) -> f64) -> SimPanel {
    let n = 201;
    let x: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
    let y0: Vec<f64> = x.iter().map(|v| 0.3 + 0.1 * v).collect();
    let y1: Vec<f64> = x.iter().zip(&y0).map(|(v, b)| b + delta(*v)).collect();
    SimPanel {
        policy: OperatorPolicy::Acknowledging,
        lot_id: (0..n as u64).collect(),
        x_d: x.clone(),
        x_y: vec![1.0; n],
        x_e: vec![1.0; n],
        x_r: vec![0.0; n],
        t: x.iter().map(|v| *v > 0.0).collect(),
        d: x.iter().map(|v| *v > 0.0).collect(),
        y: vec![0.0; n],
        y0,
        y1,
        z: vec![vec![]; n],
        category: vec![UnitCategory::Complier; n],
    }
}

#[test]
fn oracle_reproduces_constant_and_linear_effects() {
    let k = Kernel::Triangular;
    let zero = synthetic(|_| 0.0);
    assert!(oracle_effect(&zero, Axis::D, Estimand::Complier, k, 0.5).unwrap().abs() < 1e-15);
    let constant = synthetic(|_| 0.07);
    assert!((oracle_effect(&constant, Axis::D, Estimand::Complier, k, 0.5).unwrap() - 0.07).abs() < 1e-12);
    assert!((oracle_effect(&constant, Axis::D, Estimand::Itt, k, 0.5).unwrap() - 0.07).abs() < 1e-12);
    // piecewise linear with a kink at zero: each side fit is exact
    let kinked = synthetic(|x| if x > 0.0 { 0.05 + 0.2 * x } else { 0.05 - 0.1 * x });
    assert!((oracle_effect(&kinked, Axis::D, Estimand::Complier, k, 0.6).unwrap() - 0.05).abs() < 1e-10);
}

#[test]
fn no_defiers_in_shipped_policies() {
    for policy in OperatorPolicy::ALL {
        let p = panel(policy);
        for axis in [Axis::D, Axis::Y] {
            let h = 0.5 * p.axis(axis).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert_eq!(oracle_defier_correction(&p, axis, Kernel::Triangular, h).unwrap(), 0.0);
        }
    }
}

#[test]
fn injected_defier_correction() {
    let n = 400;
    let x: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / n as f64).collect();
    // every fourth unit a defier: p = 1/4, q = 3/4 under any symmetric weighting
    let cats: Vec<UnitCategory> =
        (0..n).map(|i| if i % 4 == 0 { UnitCategory::Defier } else { UnitCategory::Complier }).collect();
    let k = Kernel::Uniform;
    assert_eq!(defier_correction(&x, &vec![0.0; n], &cats, k, 2.0).unwrap(), 0.0);
    let delta = 0.12;
    let c = defier_correction(&x, &vec![delta; n], &cats, k, 2.0).unwrap();
    assert!((c - (0.25 / 0.75) * delta).abs() < 1e-12, "{c}");
    let none = vec![UnitCategory::Complier; n];
    assert_eq!(defier_correction(&x, &vec![delta; n], &none, k, 2.0).unwrap(), 0.0);
}
