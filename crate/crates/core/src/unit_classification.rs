//! Unit behavior categories of a decision rule `D` relative to a cutoff rule `T`.
//!
//! A unit is classified by varying `T`'s cutoff over its support while the
//! coordinates `T` ignores stay fixed, and comparing the responses of `T` and
//! `D`. For cutoff-rule `D` (with synchronous, zero cutoffs) this reduces to
//! enumerating atom configurations on `S(T)`; for an arbitrary decision
//! function the support is probed on a finite grid.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predicate::{Predicate, RowView};
use crate::rule_algebra::{supports_direct_sum, BoolOp, CutoffRule, RuleError};

/// Largest support size for exact classification (`2^|S(T)|` configurations).
pub const MAX_SUPPORT: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UnitCategory {
    Complier,
    Nevertaker,
    Alwaystaker,
    Defier,
    Indecisive,
}

impl UnitCategory {
    pub const ALL: [UnitCategory; 5] = [
        UnitCategory::Complier,
        UnitCategory::Nevertaker,
        UnitCategory::Alwaystaker,
        UnitCategory::Defier,
        UnitCategory::Indecisive,
    ];

    /// Short code used in CSV files.
    pub fn code(self) -> &'static str {
        match self {
            UnitCategory::Complier => "C",
            UnitCategory::Nevertaker => "NT",
            UnitCategory::Alwaystaker => "AT",
            UnitCategory::Defier => "DF",
            UnitCategory::Indecisive => "IND",
        }
    }

    pub fn is_non_change(self) -> bool {
        matches!(self, UnitCategory::Nevertaker | UnitCategory::Alwaystaker)
    }
}

impl fmt::Display for UnitCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for UnitCategory {
    type Err = ClassificationError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "C" => Ok(UnitCategory::Complier),
            "NT" => Ok(UnitCategory::Nevertaker),
            "AT" => Ok(UnitCategory::Alwaystaker),
            "DF" => Ok(UnitCategory::Defier),
            "IND" => Ok(UnitCategory::Indecisive),
            other => Err(ClassificationError::UnknownCategory(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassificationError {
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("degenerate rule: T is constant, so its support is {{0}}")]
    DegenerateRule,
    #[error("rules must be normalized to a zero cutoff before classification")]
    NonZeroCutoff,
    #[error("support of T has {0} directions; exact classification supports at most {MAX_SUPPORT}")]
    SupportTooLarge(usize),
    #[error("evaluation grid is empty in support direction I{0}")]
    EmptyGrid(usize),
    #[error("grid has {got} direction lists, support of T has {expected}")]
    GridShape { expected: usize, got: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unknown category code {0:?}")]
    UnknownCategory(String),
    #[error("row {row}: omega selects a {category} unit; only nevertakers and alwaystakers may be dropped")]
    OmegaContainsChangeUnit { row: usize, category: UnitCategory },
    #[error("category vector has {got} entries for {expected} rows")]
    CategoryLength { expected: usize, got: usize },
    #[error("row {row}: {message}")]
    Predicate { row: usize, message: String },
}

/// Where a witness was evaluated.
#[derive(Clone, Debug, PartialEq)]
pub enum WitnessPoint {
    /// Atom assignment on `S(T)`: (atom index, bit).
    Atoms(Vec<(usize, bool)>),
    /// Cutoff shift `c` on `S(T)` (one entry per support direction).
    Shift(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub point: WitnessPoint,
    pub t: bool,
    pub d: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationResult {
    pub category: UnitCategory,
    pub witnesses: Vec<Witness>,
    /// Set when the category comes from a finite grid rather than exact enumeration.
    pub approximate: bool,
}

/// Running summary of (T, D) response pairs.
#[derive(Clone, Copy, Debug)]
struct Tally {
    all_d0: bool,
    all_d1: bool,
    all_eq: bool,
    all_ne: bool,
}

impl Tally {
    fn new() -> Self {
        Tally { all_d0: true, all_d1: true, all_eq: true, all_ne: true }
    }

    fn push(&mut self, t: bool, d: bool) {
        self.all_d0 &= !d;
        self.all_d1 &= d;
        self.all_eq &= t == d;
        self.all_ne &= t != d;
    }

    fn category(self) -> UnitCategory {
        if self.all_d0 {
            UnitCategory::Nevertaker
        } else if self.all_d1 {
            UnitCategory::Alwaystaker
        } else if self.all_eq {
            UnitCategory::Complier
        } else if self.all_ne {
            UnitCategory::Defier
        } else {
            UnitCategory::Indecisive
        }
    }
}

fn check_assignment_rule(t: &CutoffRule) -> Result<Vec<usize>, ClassificationError> {
    if !t.has_zero_cutoff() {
        return Err(ClassificationError::NonZeroCutoff);
    }
    let support: Vec<usize> = t.support_directions()?.into_iter().collect();
    if support.is_empty() {
        return Err(ClassificationError::DegenerateRule);
    }
    Ok(support)
}

/// Exact classifier for a fixed (T, D) pair of zero-cutoff rules.
#[derive(Clone, Debug)]
pub struct PairClassifier {
    t: CutoffRule,
    d: CutoffRule,
    support: Vec<usize>,
}

impl PairClassifier {
    pub fn new(t: &CutoffRule, d: &CutoffRule) -> Result<Self, ClassificationError> {
        if t.dim() != d.dim() {
            return Err(RuleError::DimensionMismatch { expected: t.dim(), got: d.dim() }.into());
        }
        if !d.has_zero_cutoff() {
            return Err(ClassificationError::NonZeroCutoff);
        }
        let support = check_assignment_rule(t)?;
        if support.len() > MAX_SUPPORT {
            return Err(ClassificationError::SupportTooLarge(support.len()));
        }
        Ok(PairClassifier { t: t.clone(), d: d.clone(), support })
    }

    /// `S(T)`, ascending.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    fn configs(&self, x: &[f64]) -> Result<impl Iterator<Item = (u64, bool, bool)> + '_, ClassificationError> {
        // off-support atoms come from the unit's own scores
        let base = self.t.atom_bits(x)?;
        let support_mask = crate::rule_algebra::scatter(u64::MAX >> (64 - self.support.len()), &self.support);
        let base = base & !support_mask;
        Ok((0..1u64 << self.support.len()).map(move |m| {
            let bits = base | crate::rule_algebra::scatter(m, &self.support);
            (m, self.t.eval_bits(bits), self.d.eval_bits(bits))
        }))
    }

    pub fn category(&self, x: &[f64]) -> Result<UnitCategory, ClassificationError> {
        let mut tally = Tally::new();
        for (_, t, d) in self.configs(x)? {
            tally.push(t, d);
        }
        Ok(tally.category())
    }

    pub fn classify(&self, x: &[f64]) -> Result<ClassificationResult, ClassificationError> {
        let mut tally = Tally::new();
        let mut witnesses = Vec::with_capacity(1 << self.support.len());
        for (m, t, d) in self.configs(x)? {
            tally.push(t, d);
            let atoms = self
                .support
                .iter()
                .enumerate()
                .map(|(j, &k)| (k, (m >> j) & 1 == 1))
                .collect();
            witnesses.push(Witness { point: WitnessPoint::Atoms(atoms), t, d });
        }
        Ok(ClassificationResult { category: tally.category(), witnesses, approximate: false })
    }
}

/// Exact classification of a unit with scores `x` (already centered at zero cutoffs).
pub fn classify_cutoff(
    t: &CutoffRule,
    d: &CutoffRule,
    x: &[f64],
) -> Result<ClassificationResult, ClassificationError> {
    PairClassifier::new(t, d)?.classify(x)
}

/// Cutoff shifts probed in each support direction of `T` by [`classify_general`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// One list of shifts `c_k` per support direction, in ascending support order.
    pub offsets: Vec<Vec<f64>>,
}

impl GridSpec {
    /// Default grid: for each support coordinate `x_k`, shifts that put the
    /// probed coordinate `x_k - c_k` far below zero, just below, exactly at,
    /// just above and far above zero. `scale` sets the far distance and the
    /// tie margin `1e-6 * scale`.
    pub fn bracketing(x: &[f64], support: &[usize], scale: f64) -> Self {
        let eps = 1e-6 * scale;
        let offsets = support
            .iter()
            .map(|&k| {
                let xk = x[k - 1];
                let far = xk.abs() + scale;
                vec![xk - far, xk - eps, xk, xk + eps, xk + far]
            })
            .collect();
        GridSpec { offsets }
    }

    /// Bracketing grid plus `points` evenly spaced probe coordinates on
    /// `[-(|x_k| + scale), |x_k| + scale]`.
    pub fn with_sweep(x: &[f64], support: &[usize], scale: f64, points: usize) -> Self {
        let mut grid = Self::bracketing(x, support, scale);
        for (list, &k) in grid.offsets.iter_mut().zip(support) {
            let xk = x[k - 1];
            let radius = xk.abs() + scale;
            for i in 0..points {
                let p = if points == 1 {
                    0.0
                } else {
                    -radius + 2.0 * radius * i as f64 / (points - 1) as f64
                };
                list.push(xk - p);
            }
        }
        grid
    }
}

/// Approximate classification for an arbitrary decision function.
///
/// `T` and `d_fn` are both evaluated at `x - c` for every shift `c` in the
/// grid's Cartesian product (shifts vary only along `S(T)`).
pub fn classify_general<F>(
    t: &CutoffRule,
    d_fn: F,
    x: &[f64],
    grid: &GridSpec,
) -> Result<ClassificationResult, ClassificationError>
where
    F: Fn(&[f64]) -> bool,
{
    if x.len() != t.dim() {
        return Err(RuleError::DimensionMismatch { expected: t.dim(), got: x.len() }.into());
    }
    let support = check_assignment_rule(t)?;
    if grid.offsets.len() != support.len() {
        return Err(ClassificationError::GridShape { expected: support.len(), got: grid.offsets.len() });
    }
    if let Some(j) = grid.offsets.iter().position(|l| l.is_empty()) {
        return Err(ClassificationError::EmptyGrid(support[j]));
    }

    let mut tally = Tally::new();
    let mut witnesses = Vec::new();
    let mut idx = vec![0usize; support.len()];
    let mut point = x.to_vec();
    loop {
        let shift: Vec<f64> = idx.iter().zip(&grid.offsets).map(|(&i, l)| l[i]).collect();
        for (&k, c) in support.iter().zip(&shift) {
            point[k - 1] = x[k - 1] - c;
        }
        let tv = t.evaluate(&point)?;
        let dv = d_fn(&point);
        tally.push(tv, dv);
        witnesses.push(Witness { point: WitnessPoint::Shift(shift), t: tv, d: dv });

        // odometer over the Cartesian product
        let mut j = 0;
        loop {
            if j == idx.len() {
                return Ok(ClassificationResult {
                    category: tally.category(),
                    witnesses,
                    approximate: true,
                });
            }
            idx[j] += 1;
            if idx[j] < grid.offsets[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// Category of `G` relative to `T = G op H` when supports form a direct sum.
///
/// AND: complier iff `H` holds at the part of `x` that `G` ignores, else
/// nevertaker. OR: complier iff `H` fails there, else alwaystaker.
pub fn simple_rule_categories(
    g: &CutoffRule,
    h: &CutoffRule,
    op: BoolOp,
    x: &[f64],
) -> Result<UnitCategory, ClassificationError> {
    if !g.has_zero_cutoff() || !h.has_zero_cutoff() {
        return Err(ClassificationError::NonZeroCutoff);
    }
    if g.is_constant()?.is_some() {
        return Err(ClassificationError::DegenerateRule);
    }
    if !supports_direct_sum(g, h, op)? {
        return Err(ClassificationError::Precondition(
            "supports of G and H must form a direct sum".into(),
        ));
    }
    let h_value = h.evaluate(&g.decompose(x)?.x_perp)?;
    Ok(match (op, h_value) {
        (BoolOp::And, true) => UnitCategory::Complier,
        (BoolOp::And, false) => UnitCategory::Nevertaker,
        (BoolOp::Or, false) => UnitCategory::Complier,
        (BoolOp::Or, true) => UnitCategory::Alwaystaker,
    })
}

/// Possible categories of a unit for `(G, D)` given its categories for
/// `(G, T)` and `(T, D)`, where `T = G op H` with a direct-sum support.
///
/// Only inclusions are known, so the answer is a set. Combinations that
/// carry no information (indecisive inputs) map to every category.
pub fn inherited_category(
    cat_gt: UnitCategory,
    cat_td: UnitCategory,
    op: BoolOp,
) -> BTreeSet<UnitCategory> {
    use UnitCategory::*;
    let set = |cats: &[UnitCategory]| cats.iter().copied().collect::<BTreeSet<_>>();
    match (op, cat_td, cat_gt) {
        // non-change units of (T, D) keep their category for any G with supp(G) ⊂ supp(T)
        (_, Nevertaker, _) => set(&[Nevertaker]),
        (_, Alwaystaker, _) => set(&[Alwaystaker]),
        (_, Indecisive, _) => set(&UnitCategory::ALL),

        (BoolOp::And, Complier, Complier) => set(&[Complier]),
        (BoolOp::And, Complier, Nevertaker) => set(&[Nevertaker]),
        (BoolOp::And, Complier, _) => set(&[Complier, Nevertaker]),
        (BoolOp::And, Defier, Complier) => set(&[Defier]),
        (BoolOp::And, Defier, Nevertaker) => set(&[Alwaystaker]),
        (BoolOp::And, Defier, _) => set(&[Defier, Alwaystaker]),

        (BoolOp::Or, Complier, Complier) => set(&[Complier]),
        (BoolOp::Or, Complier, Alwaystaker) => set(&[Alwaystaker]),
        (BoolOp::Or, Complier, _) => set(&[Complier, Alwaystaker]),
        (BoolOp::Or, Defier, Complier) => set(&[Defier]),
        (BoolOp::Or, Defier, Alwaystaker) => set(&[Nevertaker]),
        (BoolOp::Or, Defier, _) => set(&[Defier, Nevertaker]),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub complier: usize,
    pub nevertaker: usize,
    pub alwaystaker: usize,
    pub defier: usize,
    pub indecisive: usize,
}

impl CategoryCounts {
    pub fn from_categories(cats: &[UnitCategory]) -> Self {
        let mut c = CategoryCounts::default();
        for cat in cats {
            c.add(*cat);
        }
        c
    }

    pub fn add(&mut self, cat: UnitCategory) {
        match cat {
            UnitCategory::Complier => self.complier += 1,
            UnitCategory::Nevertaker => self.nevertaker += 1,
            UnitCategory::Alwaystaker => self.alwaystaker += 1,
            UnitCategory::Defier => self.defier += 1,
            UnitCategory::Indecisive => self.indecisive += 1,
        }
    }

    pub fn get(&self, cat: UnitCategory) -> usize {
        match cat {
            UnitCategory::Complier => self.complier,
            UnitCategory::Nevertaker => self.nevertaker,
            UnitCategory::Alwaystaker => self.alwaystaker,
            UnitCategory::Defier => self.defier,
            UnitCategory::Indecisive => self.indecisive,
        }
    }

    pub fn total(&self) -> usize {
        self.complier + self.nevertaker + self.alwaystaker + self.defier + self.indecisive
    }
}

impl fmt::Display for CategoryCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "C={} NT={} AT={} DF={} IND={}",
            self.complier, self.nevertaker, self.alwaystaker, self.defier, self.indecisive
        )
    }
}

/// Exact classification of every row (rows are zero-cutoff score vectors).
pub fn classify_dataset(
    t: &CutoffRule,
    d: &CutoffRule,
    rows: &[Vec<f64>],
) -> Result<(Vec<UnitCategory>, CategoryCounts), ClassificationError> {
    let classifier = PairClassifier::new(t, d)?;
    let cats = rows
        .par_iter()
        .map(|x| classifier.category(x))
        .collect::<Result<Vec<_>, _>>()?;
    let counts = CategoryCounts::from_categories(&cats);
    Ok((cats, counts))
}

/// Grid-based classification of every row against a general decision function.
/// `d_fn` receives the row index and the probed point.
pub fn classify_dataset_general<F>(
    t: &CutoffRule,
    d_fn: F,
    rows: &[Vec<f64>],
    scale: f64,
) -> Result<(Vec<UnitCategory>, CategoryCounts), ClassificationError>
where
    F: Fn(usize, &[f64]) -> bool + Sync,
{
    let support = check_assignment_rule(t)?;
    let cats = rows
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let grid = GridSpec::bracketing(x, &support, scale);
            classify_general(t, |p| d_fn(i, p), x, &grid).map(|r| r.category)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let counts = CategoryCounts::from_categories(&cats);
    Ok((cats, counts))
}

/// Keep-mask for a subset estimate: `false` for rows selected by `omega`.
///
/// When `categories` (relative to the rule being estimated) are given, every
/// dropped row must be a nevertaker or alwaystaker.
pub fn subset_mask<R: RowView>(
    rows: &[R],
    omega: Option<&Predicate>,
    categories: Option<&[UnitCategory]>,
) -> Result<Vec<bool>, ClassificationError> {
    if let Some(cats) = categories {
        if cats.len() != rows.len() {
            return Err(ClassificationError::CategoryLength { expected: rows.len(), got: cats.len() });
        }
    }
    let Some(omega) = omega else {
        return Ok(vec![true; rows.len()]);
    };
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let dropped = omega
                .eval(row)
                .map_err(|e| ClassificationError::Predicate { row: i, message: e.to_string() })?;
            if dropped {
                if let Some(cat) = categories.map(|c| c[i]) {
                    if !cat.is_non_change() {
                        return Err(ClassificationError::OmegaContainsChangeUnit { row: i, category: cat });
                    }
                }
            }
            Ok(!dropped)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use UnitCategory::*;

    fn rule(text: &str, dim: usize) -> CutoffRule {
        CutoffRule::parse(text, dim).unwrap()
    }

    fn cat(t: &str, d: &str, x: &[f64]) -> UnitCategory {
        classify_cutoff(&rule(t, x.len()), &rule(d, x.len()), x).unwrap().category
    }

    #[test]
    fn and_rule_example() {
        assert_eq!(cat("I1", "I1 & I2", &[3.0, 0.5]), Complier);
        assert_eq!(cat("I1", "I1 & I2", &[3.0, -0.5]), Nevertaker);
    }

    #[test]
    fn xor_dominant_rule() {
        let d = "(I1 | I2) & (!I1 | !I2)";
        assert_eq!(cat("I1", d, &[0.2, 0.5]), Defier);
        assert_eq!(cat("I1", d, &[0.2, -0.5]), Complier);
    }

    #[test]
    fn or_rule_example() {
        assert_eq!(cat("I1", "I1 | I2", &[-1.0, -0.5]), Complier);
        assert_eq!(cat("I1", "I1 | I2", &[-1.0, 0.5]), Alwaystaker);
    }

    #[test]
    fn indecisive_construction() {
        let t = "I1 & I2";
        let d = "(I1 & I2 & I1 & I2) | (!(I1 & I2) & !I1 & I2) | (I1 & !I2)";
        let res = classify_cutoff(&rule(t, 2), &rule(d, 2), &[0.0, 0.0]).unwrap();
        assert_eq!(res.category, Indecisive);
        let agree: Vec<bool> = res.witnesses.iter().map(|w| w.t == w.d).collect();
        // configs in mask order: (0,0), (1,0), (0,1), (1,1)
        assert_eq!(agree, vec![true, false, false, true]);
    }

    #[test]
    fn four_variable_rule() {
        let t = "I1 & I2";
        let d = "(I1 & I2 & I3) | (!I3 & I4)";
        assert_eq!(cat(t, d, &[0.1, 0.1, 0.5, 0.1]), Complier);
        assert_eq!(cat(t, d, &[0.1, 0.1, -0.5, 0.5]), Alwaystaker);
        assert_eq!(cat(t, d, &[0.1, 0.1, -0.5, -0.5]), Nevertaker);
    }

    #[test]
    fn degenerate_and_unnormalized_inputs() {
        let err = classify_cutoff(&rule("I1 | !I1", 2), &rule("I1", 2), &[0.0, 0.0]).unwrap_err();
        assert_eq!(err, ClassificationError::DegenerateRule);
        assert!(err.to_string().contains("degenerate rule"));
        let err = classify_cutoff(&rule("I1 @ c=(1, 0)", 2), &rule("I1", 2), &[0.0, 0.0]).unwrap_err();
        assert_eq!(err, ClassificationError::NonZeroCutoff);
        assert!(classify_cutoff(&rule("I1", 2), &rule("I1", 3), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn ties_fall_below() {
        // off-support coordinate exactly at zero reads as atom 0
        assert_eq!(cat("I1", "I1 & I2", &[1.0, 0.0]), Nevertaker);
    }

    #[test]
    fn general_constant_zero_is_nevertaker() {
        let t = rule("I1 & I2", 3);
        let x = [0.3, -0.2, 1.0];
        for scale in [0.1, 1.0, 10.0] {
            let grid = GridSpec::bracketing(&x, &[1, 2], scale);
            let r = classify_general(&t, |_| false, &x, &grid).unwrap();
            assert_eq!(r.category, Nevertaker);
            assert!(r.approximate);
        }
    }

    #[test]
    fn general_matches_exact_on_fixtures() {
        let cases = [
            ("I1", "I1 & I2", vec![3.0, 0.5]),
            ("I1", "I1 & I2", vec![3.0, -0.5]),
            ("I1", "(I1 | I2) & (!I1 | !I2)", vec![-2.0, 0.5]),
            ("I1 & I2", "(I1 & I2 & I3) | (!I3 & I4)", vec![1.0, -1.0, -0.5, 0.5]),
        ];
        for (t, d, x) in cases {
            let t = rule(t, x.len());
            let d = rule(d, x.len());
            let exact = classify_cutoff(&t, &d, &x).unwrap().category;
            let support: Vec<usize> = t.support_directions().unwrap().into_iter().collect();
            let grid = GridSpec::bracketing(&x, &support, 1.0);
            let approx = classify_general(&t, |p| d.evaluate(p).unwrap(), &x, &grid).unwrap();
            assert_eq!(exact, approx.category);
        }
    }

    #[test]
    fn general_reasonable_operator_is_indecisive() {
        // T = I_D & I_Y on centered (x_d, x_y); D uses x_y + x_r instead of x_y
        let t = rule("I1 & I2", 2);
        let x = [0.4, 0.1];
        for x_r in [0.05, -0.05, 1e-3] {
            let grid = GridSpec::bracketing(&x, &[1, 2], 1.0);
            let r = classify_general(&t, |p| p[0] > 0.0 && p[1] + x_r > 0.0, &x, &grid).unwrap();
            assert_eq!(r.category, Indecisive, "x_r = {x_r}");
        }
        let grid = GridSpec::bracketing(&x, &[1, 2], 1.0);
        let r = classify_general(&t, |p| p[0] > 0.0 && p[1] > 0.0, &x, &grid).unwrap();
        assert_eq!(r.category, Complier);
    }

    #[test]
    fn general_grid_errors() {
        let t = rule("I1", 2);
        let empty = GridSpec { offsets: vec![vec![]] };
        assert_eq!(
            classify_general(&t, |_| true, &[0.0, 0.0], &empty).unwrap_err(),
            ClassificationError::EmptyGrid(1)
        );
        let wrong = GridSpec { offsets: vec![vec![1.0], vec![1.0]] };
        assert!(matches!(
            classify_general(&t, |_| true, &[0.0, 0.0], &wrong),
            Err(ClassificationError::GridShape { .. })
        ));
    }

    #[test]
    fn sweep_grid_contains_bracketing() {
        let g = GridSpec::with_sweep(&[0.5], &[1], 1.0, 5);
        assert_eq!(g.offsets[0].len(), 10);
        assert!(g.offsets[0].iter().any(|&c| c < 0.5) && g.offsets[0].iter().any(|&c| c > 0.5));
    }

    #[test]
    fn simple_rule_examples() {
        let g = rule("I1", 2);
        let h = rule("I2", 2);
        assert_eq!(simple_rule_categories(&g, &h, BoolOp::And, &[0.3, 1.0]).unwrap(), Complier);
        assert_eq!(simple_rule_categories(&g, &h, BoolOp::Or, &[0.3, 1.0]).unwrap(), Alwaystaker);
        assert_eq!(simple_rule_categories(&g, &h, BoolOp::Or, &[0.3, -1.0]).unwrap(), Complier);
        assert!(matches!(
            simple_rule_categories(&g, &rule("I1 & I2", 2), BoolOp::And, &[0.3, 1.0]),
            Err(ClassificationError::Precondition(_))
        ));
        // agrees with the exact classifier
        for x in [[0.3, 1.0], [-0.3, -1.0], [2.0, 0.0]] {
            for op in [BoolOp::And, BoolOp::Or] {
                let t = g.combine(&h, op).unwrap();
                assert_eq!(
                    simple_rule_categories(&g, &h, op, &x).unwrap(),
                    classify_cutoff(&g, &t, &x).unwrap().category
                );
            }
        }
    }

    #[test]
    fn inheritance_examples() {
        assert_eq!(inherited_category(Complier, Defier, BoolOp::And), BTreeSet::from([Defier]));
        assert_eq!(inherited_category(Nevertaker, Defier, BoolOp::And), BTreeSet::from([Alwaystaker]));
        for op in [BoolOp::And, BoolOp::Or] {
            for g in UnitCategory::ALL {
                assert_eq!(inherited_category(g, Nevertaker, op), BTreeSet::from([Nevertaker]));
            }
        }
        assert_eq!(inherited_category(Complier, Complier, BoolOp::And), BTreeSet::from([Complier]));
        assert_eq!(inherited_category(Alwaystaker, Defier, BoolOp::Or), BTreeSet::from([Nevertaker]));
    }

    #[test]
    fn dataset_counts() {
        let t = rule("I1 & I2", 4);
        let d = rule("(I1 & I2 & I3) | (!I3 & I4)", 4);
        let rows = vec![
            vec![0.1, 0.1, 0.5, 0.1],
            vec![0.1, 0.1, -0.5, 0.5],
            vec![0.1, 0.1, -0.5, -0.5],
        ];
        let (cats, counts) = classify_dataset(&t, &d, &rows).unwrap();
        assert_eq!(cats, vec![Complier, Alwaystaker, Nevertaker]);
        assert_eq!((counts.complier, counts.alwaystaker, counts.nevertaker), (1, 1, 1));
        assert_eq!(counts.total(), 3);

        let (cats, counts) = classify_dataset(&t, &d, &[]).unwrap();
        assert!(cats.is_empty());
        assert_eq!(counts, CategoryCounts::default());
    }

    #[test]
    fn category_codes_round_trip() {
        for c in UnitCategory::ALL {
            assert_eq!(c.code().parse::<UnitCategory>().unwrap(), c);
        }
        assert!("X".parse::<UnitCategory>().is_err());
    }
}
