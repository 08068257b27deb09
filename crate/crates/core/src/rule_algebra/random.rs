//! Random expression generator used by property tests and the acceptance suite.

use rand::Rng;

use super::{BoolExpr, CutoffRule};

/// Random expression over the given atoms, at most `depth` operator levels.
/// `And`/`Or` nodes always get two or three children.
pub fn random_expr<R: Rng + ?Sized>(rng: &mut R, atoms: &[usize], depth: usize) -> BoolExpr {
    assert!(!atoms.is_empty(), "need at least one atom");
    if depth == 0 || rng.random_bool(0.3) {
        return if rng.random_bool(0.05) {
            BoolExpr::Const(rng.random_bool(0.5))
        } else {
            BoolExpr::Atom(atoms[rng.random_range(0..atoms.len())])
        };
    }
    match rng.random_range(0..5) {
        0 => BoolExpr::not(random_expr(rng, atoms, depth - 1)),
        1 | 2 => {
            let n = rng.random_range(2..=3);
            BoolExpr::And((0..n).map(|_| random_expr(rng, atoms, depth - 1)).collect())
        }
        _ => {
            let n = rng.random_range(2..=3);
            BoolExpr::Or((0..n).map(|_| random_expr(rng, atoms, depth - 1)).collect())
        }
    }
}

/// Random zero-cutoff rule over atoms `1..=dim`.
pub fn random_rule<R: Rng + ?Sized>(rng: &mut R, dim: usize, depth: usize) -> CutoffRule {
    let atoms: Vec<usize> = (1..=dim).collect();
    CutoffRule::new(random_expr(rng, &atoms, depth), dim).expect("atoms within dim")
}

/// Random zero-cutoff rule over a subset of atoms that is not constant.
pub fn random_nondegenerate_rule<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    atoms: &[usize],
    depth: usize,
) -> CutoffRule {
    loop {
        let rule = CutoffRule::new(random_expr(rng, atoms, depth), dim).expect("atoms within dim");
        if rule.is_constant().expect("small rule").is_none() {
            return rule;
        }
    }
}
