use std::collections::BTreeSet;

use mrd_core::rule_algebra::random::{random_expr, random_rule};
use mrd_core::{BoolExpr, BoolOp, CutoffRule};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_point(r: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|_| if r.random_bool(0.1) { 0.0 } else { r.random_range(-2.0..2.0) })
        .collect()
}

// brute-force atom dependence, independent of the truth-table helper
fn brute_support(rule: &CutoffRule) -> BTreeSet<usize> {
    let k = rule.dim();
    let mut out = BTreeSet::new();
    for j in 0..k {
        for bits in 0u64..(1 << k) {
            if rule.eval_bits(bits) != rule.eval_bits(bits ^ (1 << j)) {
                out.insert(j + 1);
                break;
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn normalization_is_equivalent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dim = r.random_range(1..=4);
        let rule = random_rule(&mut r, dim, 3);
        for _ in 0..20 {
            let c: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
            let mut x = random_point(&mut r, dim);
            if r.random_bool(0.2) {
                x[0] = c[0];
            }
            let shifted = rule.at_cutoff(c.clone()).unwrap();
            let (norm, shift) = shifted.normalize_cutoff();
            prop_assert_eq!(&shift, &c);
            prop_assert!(norm.has_zero_cutoff());
            let centered: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
            prop_assert_eq!(shifted.evaluate(&x).unwrap(), norm.evaluate(&centered).unwrap());
            prop_assert_eq!(norm.normalize_cutoff().0, norm.clone());
        }
    }

    #[test]
    fn constant_iff_empty_support(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dim = r.random_range(1..=5);
        let rule = random_rule(&mut r, dim, 3);
        let support = rule.support_directions().unwrap();
        prop_assert_eq!(&support, &brute_support(&rule));
        prop_assert_eq!(rule.is_constant().unwrap().is_some(), support.is_empty());
        prop_assert_eq!(rule.negate().support_directions().unwrap(), support);
    }

    #[test]
    fn decomposition_properties(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dim = r.random_range(1..=4);
        let rule = random_rule(&mut r, dim, 3);
        let support = rule.support_directions().unwrap();
        let x = random_point(&mut r, dim);
        let dec = rule.decompose(&x).unwrap();
        for k in 0..dim {
            prop_assert_eq!(dec.x_supp[k] + dec.x_perp[k], x[k]);
            if support.contains(&(k + 1)) {
                prop_assert_eq!(dec.x_perp[k], 0.0);
            } else {
                prop_assert_eq!(dec.x_supp[k], 0.0);
            }
        }
        let sum: Vec<f64> = dec.x_supp.iter().zip(&dec.x_perp).map(|(a, b)| a + b).collect();
        prop_assert_eq!(rule.evaluate(&x).unwrap(), rule.evaluate(&sum).unwrap());
        // x_perp is blind to cutoff moves on the support
        let mut c = vec![0.0; dim];
        for &k in &support {
            c[k - 1] = r.random_range(-1.0..1.0);
        }
        let moved = rule.at_cutoff(c).unwrap();
        prop_assert_eq!(moved.evaluate(&dec.x_perp).unwrap(), moved.evaluate(&vec![0.0; dim]).unwrap());
    }

    #[test]
    fn display_parses_back(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dim = r.random_range(1..=5);
        let rule = random_rule(&mut r, dim, 4);
        let text = rule.to_string();
        let back = CutoffRule::parse(&text, dim).unwrap();
        prop_assert_eq!(back.expr(), rule.expr());
        let c: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let shifted = rule.at_cutoff(c).unwrap();
        prop_assert_eq!(CutoffRule::parse(&shifted.to_string(), dim).unwrap(), shifted);
    }

    #[test]
    fn combined_support_is_within_union(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dim = r.random_range(1..=4);
        let g = random_rule(&mut r, dim, 3);
        let h = random_rule(&mut r, dim, 3);
        let union: BTreeSet<usize> = g.support_directions().unwrap().union(&h.support_directions().unwrap()).copied().collect();
        for op in [BoolOp::And, BoolOp::Or] {
            let t = g.combine(&h, op).unwrap();
            prop_assert!(t.support_directions().unwrap().is_subset(&union));
            let x = random_point(&mut r, dim);
            let (a, b) = (g.evaluate(&x).unwrap(), h.evaluate(&x).unwrap());
            let want = match op { BoolOp::And => a && b, BoolOp::Or => a || b };
            prop_assert_eq!(t.evaluate(&x).unwrap(), want);
        }
        let x = random_point(&mut r, dim);
        prop_assert_eq!(g.negate().evaluate(&x).unwrap(), !g.evaluate(&x).unwrap());
    }

    #[test]
    fn disjoint_atoms_form_a_direct_sum(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = CutoffRule::new(random_expr(&mut r, &[1, 2], 2), 4).unwrap();
        let h = CutoffRule::new(random_expr(&mut r, &[3, 4], 2), 4).unwrap();
        let sg = g.support_directions().unwrap();
        let sh = h.support_directions().unwrap();
        for op in [BoolOp::And, BoolOp::Or] {
            let st = g.combine(&h, op).unwrap().support_directions().unwrap();
            let want = st == sg.union(&sh).copied().collect::<BTreeSet<_>>();
            prop_assert_eq!(mrd_core::rule_algebra::supports_direct_sum(&g, &h, op).unwrap(), want);
        }
    }
}

#[test]
fn evaluation_uses_strict_inequality() {
    let rule = CutoffRule::parse("I1 & I2", 2).unwrap();
    assert!(rule.evaluate(&[0.5, 0.3]).unwrap());
    assert!(!rule.evaluate(&[0.0, 0.3]).unwrap());
    assert!(rule.evaluate(&[0.5]).is_err());
    let rule = CutoffRule::parse("(I1 & I2) | I3", 3).unwrap();
    assert_eq!(rule.expr(), &BoolExpr::Or(vec![BoolExpr::And(vec![BoolExpr::Atom(1), BoolExpr::Atom(2)]), BoolExpr::Atom(3)]));
    assert!(rule.evaluate(&[-1.0, -1.0, 2.0]).unwrap());
}
