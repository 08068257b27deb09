//! Boolean cutoff rules over a K-dimensional score space.
//!
//! A [`CutoffRule`] is a Boolean function `g` applied to the strict
//! indicators `1[x_k > c_k]`. Support directions are computed exactly from
//! the truth table of `g`.

mod expr;
mod parse;
pub mod random;

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use expr::{BoolExpr, TruthTable};
pub(crate) use expr::scatter;

/// Largest number of distinct atoms for exhaustive truth-table analysis.
pub const MAX_TABLE_ATOMS: usize = 24;
/// Largest score dimension a rule may have (atoms are packed into a `u64`).
pub const MAX_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("atom I{atom} out of range for dimension {dim}")]
    AtomOutOfRange { atom: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("rule mentions {atoms} atoms; exact enumeration supports at most {max}")]
    TooManyAtoms { atoms: usize, max: usize },
    #[error("rules have different cutoffs; normalize them first")]
    CutoffMismatch,
    #[error("dimension {0} is outside 1..={MAX_DIM}")]
    BadDimension(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// A point in score space. Entries are finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self, RuleError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RuleError::NonFinite("score vector"));
        }
        Ok(ScoreVector(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ScoreVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ScoreVector {
    type Error = RuleError;
    fn try_from(v: Vec<f64>) -> Result<Self, RuleError> {
        ScoreVector::new(v)
    }
}

impl From<ScoreVector> for Vec<f64> {
    fn from(v: ScoreVector) -> Vec<f64> {
        v.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoolOp {
    And,
    Or,
}

/// Boolean expression plus a cutoff vector. Immutable; cloning is cheap.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffRule {
    expr: Arc<BoolExpr>,
    cutoff: Arc<[f64]>,
}

/// Split of a score vector into its support part and the part the rule ignores.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub x_supp: Vec<f64>,
    pub x_perp: Vec<f64>,
}

impl CutoffRule {
    /// Builds a rule with a zero cutoff.
    pub fn new(expr: BoolExpr, dim: usize) -> Result<Self, RuleError> {
        Self::with_cutoff(expr, vec![0.0; dim])
    }

    pub fn with_cutoff(expr: BoolExpr, cutoff: Vec<f64>) -> Result<Self, RuleError> {
        let dim = cutoff.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(RuleError::BadDimension(dim));
        }
        if cutoff.iter().any(|c| !c.is_finite()) {
            return Err(RuleError::NonFinite("cutoff"));
        }
        if let Some(atom) = expr.max_atom() {
            if atom > dim {
                return Err(RuleError::AtomOutOfRange { atom, dim });
            }
        }
        Ok(CutoffRule { expr: Arc::new(expr), cutoff: cutoff.into() })
    }

    /// Parses the rule DSL. Without a `@ c=(...)` clause the cutoff is zero.
    pub fn parse(text: &str, dim: usize) -> Result<Self, RuleError> {
        let parsed = parse::parse(text)?;
        let cutoff = match parsed.cutoff {
            Some(c) if c.len() != dim => {
                return Err(RuleError::DimensionMismatch { expected: dim, got: c.len() })
            }
            Some(c) => c,
            None => vec![0.0; dim],
        };
        Self::with_cutoff(parsed.expr, cutoff)
    }

    pub fn expr(&self) -> &BoolExpr {
        &self.expr
    }

    pub fn cutoff(&self) -> &[f64] {
        &self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff.len()
    }

    pub fn has_zero_cutoff(&self) -> bool {
        self.cutoff.iter().all(|&c| c == 0.0)
    }

    /// Atom bits `1[x_k > c_k]` packed into a `u64`.
    pub fn atom_bits(&self, x: &[f64]) -> Result<u64, RuleError> {
        self.check_dim(x.len())?;
        Ok(x.iter()
            .zip(self.cutoff.iter())
            .enumerate()
            .filter(|(_, (xk, ck))| xk > ck)
            .fold(0u64, |acc, (k, _)| acc | (1 << k)))
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<bool, RuleError> {
        Ok(self.expr.eval(self.atom_bits(x)?))
    }

    /// Evaluates `g` directly on atom bits, ignoring the cutoff.
    pub fn eval_bits(&self, bits: u64) -> bool {
        self.expr.eval(bits)
    }

    fn check_dim(&self, got: usize) -> Result<(), RuleError> {
        if got != self.dim() {
            return Err(RuleError::DimensionMismatch { expected: self.dim(), got });
        }
        Ok(())
    }

    /// Equivalent rule with zero cutoff, and the shift to subtract from scores:
    /// `normalized.evaluate(x - shift) == self.evaluate(x)`.
    pub fn normalize_cutoff(&self) -> (CutoffRule, Vec<f64>) {
        let normalized = CutoffRule {
            expr: Arc::clone(&self.expr),
            cutoff: vec![0.0; self.dim()].into(),
        };
        (normalized, self.cutoff.to_vec())
    }

    pub fn truth_table(&self) -> Result<TruthTable, RuleError> {
        let atoms: Vec<usize> = self.expr.atoms().into_iter().collect();
        if atoms.len() > MAX_TABLE_ATOMS {
            return Err(RuleError::TooManyAtoms { atoms: atoms.len(), max: MAX_TABLE_ATOMS });
        }
        Ok(TruthTable::build(&self.expr, atoms))
    }

    /// Indices `k` (1-based) along which the rule can change.
    pub fn support_directions(&self) -> Result<BTreeSet<usize>, RuleError> {
        let table = self.truth_table()?;
        Ok(table
            .atoms
            .iter()
            .enumerate()
            .filter(|(j, _)| table.depends_on(*j))
            .map(|(_, &k)| k)
            .collect())
    }

    /// `Some(value)` when the rule is constant, `None` otherwise.
    pub fn is_constant(&self) -> Result<Option<bool>, RuleError> {
        let table = self.truth_table()?;
        let first = table.value(0);
        let constant = (0..table.len() as u64).all(|m| table.value(m) == first);
        Ok(constant.then_some(first))
    }

    /// Coordinate projection of `x` onto the support and its complement.
    pub fn decompose(&self, x: &[f64]) -> Result<Decomposition, RuleError> {
        self.check_dim(x.len())?;
        let support = self.support_directions()?;
        let mut x_supp = vec![0.0; x.len()];
        let mut x_perp = vec![0.0; x.len()];
        for (i, &v) in x.iter().enumerate() {
            if support.contains(&(i + 1)) {
                x_supp[i] = v;
            } else {
                x_perp[i] = v;
            }
        }
        Ok(Decomposition { x_supp, x_perp })
    }

    pub fn combine(&self, other: &CutoffRule, op: BoolOp) -> Result<CutoffRule, RuleError> {
        self.check_dim(other.dim())?;
        if self.cutoff != other.cutoff {
            return Err(RuleError::CutoffMismatch);
        }
        let children = [(*self.expr).clone(), (*other.expr).clone()];
        let expr = match op {
            BoolOp::And => BoolExpr::and(children),
            BoolOp::Or => BoolExpr::or(children),
        };
        Ok(CutoffRule { expr: Arc::new(expr), cutoff: Arc::clone(&self.cutoff) })
    }

    pub fn negate(&self) -> CutoffRule {
        CutoffRule {
            expr: Arc::new(BoolExpr::not((*self.expr).clone())),
            cutoff: Arc::clone(&self.cutoff),
        }
    }

    /// Same Boolean function, different cutoff vector.
    pub fn at_cutoff(&self, cutoff: Vec<f64>) -> Result<CutoffRule, RuleError> {
        self.check_dim(cutoff.len())?;
        CutoffRule::with_cutoff((*self.expr).clone(), cutoff)
    }
}

/// True iff `S(g)` and `S(h)` are disjoint and together span `S(g op h)`.
pub fn supports_direct_sum(g: &CutoffRule, h: &CutoffRule, op: BoolOp) -> Result<bool, RuleError> {
    let sg = g.support_directions()?;
    let sh = h.support_directions()?;
    if !sg.is_disjoint(&sh) {
        return Ok(false);
    }
    let st = g.combine(h, op)?.support_directions()?;
    Ok(sg.union(&sh).copied().collect::<BTreeSet<_>>() == st)
}

impl fmt::Display for CutoffRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expr)?;
        if !self.has_zero_cutoff() {
            let parts: Vec<String> = self.cutoff.iter().map(|c| format!("{c:?}")).collect();
            write!(f, " @ c=({})", parts.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct RuleJson {
    expr: String,
    cutoff: Vec<f64>,
    dim: usize,
}

impl Serialize for CutoffRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RuleJson { expr: self.expr.to_string(), cutoff: self.cutoff.to_vec(), dim: self.dim() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CutoffRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RuleJson::deserialize(d)?;
        if raw.cutoff.len() != raw.dim {
            return Err(serde::de::Error::custom(RuleError::DimensionMismatch {
                expected: raw.dim,
                got: raw.cutoff.len(),
            }));
        }
        let parsed = parse::parse(&raw.expr).map_err(serde::de::Error::custom)?;
        if parsed.cutoff.is_some() {
            return Err(serde::de::Error::custom("cutoff belongs in the `cutoff` field"));
        }
        CutoffRule::with_cutoff(parsed.expr, raw.cutoff).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(text: &str, dim: usize) -> CutoffRule {
        CutoffRule::parse(text, dim).unwrap()
    }

    #[test]
    fn parse_examples() {
        let r = rule("I1 & I2", 2);
        assert_eq!(r.expr(), &BoolExpr::and([BoolExpr::atom(1), BoolExpr::atom(2)]));
        assert_eq!(r.cutoff(), &[0.0, 0.0]);

        let r = rule("(I1 & I2) | I3", 3);
        assert_eq!(
            r.expr(),
            &BoolExpr::or([
                BoolExpr::and([BoolExpr::atom(1), BoolExpr::atom(2)]),
                BoolExpr::atom(3)
            ])
        );

        assert_eq!(
            CutoffRule::parse("I1 & I4", 2).unwrap_err(),
            RuleError::AtomOutOfRange { atom: 4, dim: 2 }
        );
    }

    #[test]
    fn parse_errors_carry_positions() {
        match CutoffRule::parse("I1 & ", 2).unwrap_err() {
            RuleError::Syntax { position, .. } => assert_eq!(position, 5),
            e => panic!("unexpected {e:?}"),
        }
        match CutoffRule::parse("I1 ^ I2", 2).unwrap_err() {
            RuleError::Syntax { position, .. } => assert_eq!(position, 3),
            e => panic!("unexpected {e:?}"),
        }
        assert!(matches!(CutoffRule::parse("(I1", 1), Err(RuleError::Syntax { .. })));
        assert!(matches!(CutoffRule::parse("I0", 1), Err(RuleError::Syntax { .. })));
        assert!(matches!(
            CutoffRule::parse("I1 @ c=(1, 2)", 1),
            Err(RuleError::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn cutoff_clause() {
        let r = rule("I1 & I2 @ c=(1, -1)", 2);
        assert_eq!(r.cutoff(), &[1.0, -1.0]);
        assert_eq!(r.to_string(), "I1 & I2 @ c=(1.0, -1.0)");
    }

    #[test]
    fn evaluate_examples() {
        let r = rule("I1 & I2", 2);
        assert!(r.evaluate(&[0.5, 0.3]).unwrap());
        // strict inequality at the cutoff
        assert!(!r.evaluate(&[0.0, 0.3]).unwrap());
        assert!(rule("(I1&I2)|I3", 3).evaluate(&[-1.0, -1.0, 2.0]).unwrap());
        assert_eq!(
            r.evaluate(&[1.0]).unwrap_err(),
            RuleError::DimensionMismatch { expected: 2, got: 1 }
        );
    }

    #[test]
    fn normalize_examples() {
        let r = rule("I1 @ c=(2)", 1);
        let (n, shift) = r.normalize_cutoff();
        assert_eq!(shift, vec![2.0]);
        assert!(r.evaluate(&[3.0]).unwrap());
        assert!(n.evaluate(&[1.0]).unwrap());

        let r = rule("I1&I2 @ c=(1,-1)", 2);
        let (n, shift) = r.normalize_cutoff();
        let x = [1.0, 0.0];
        let shifted: Vec<f64> = x.iter().zip(&shift).map(|(a, b)| a - b).collect();
        assert_eq!(shifted, vec![0.0, 1.0]);
        assert!(!r.evaluate(&x).unwrap());
        assert!(!n.evaluate(&shifted).unwrap());

        let (n2, shift2) = n.normalize_cutoff();
        assert_eq!(n2, n);
        assert_eq!(shift2, vec![0.0, 0.0]);
    }

    #[test]
    fn support_examples() {
        assert_eq!(rule("I1 & (I2 | !I2)", 2).support_directions().unwrap(), BTreeSet::from([1]));
        assert!(rule("1", 3).support_directions().unwrap().is_empty());
        assert_eq!(
            rule("(I1&I2)|I3", 3).support_directions().unwrap(),
            BTreeSet::from([1, 2, 3])
        );
    }

    #[test]
    fn constant_examples() {
        assert_eq!(rule("I1 | !I1", 1).is_constant().unwrap(), Some(true));
        assert_eq!(rule("I1", 1).is_constant().unwrap(), None);
        assert_eq!(rule("I1 & !I1", 1).is_constant().unwrap(), Some(false));
        assert_eq!(rule("0", 2).is_constant().unwrap(), Some(false));
    }

    #[test]
    fn too_many_atoms_is_an_error() {
        let text: Vec<String> = (1..=25).map(|k| format!("I{k}")).collect();
        let r = rule(&text.join(" & "), 25);
        assert!(matches!(r.support_directions(), Err(RuleError::TooManyAtoms { atoms: 25, .. })));
    }

    #[test]
    fn decompose_examples() {
        let d = rule("I1", 2).decompose(&[2.0, -1.0]).unwrap();
        assert_eq!(d.x_supp, vec![2.0, 0.0]);
        assert_eq!(d.x_perp, vec![0.0, -1.0]);
        let d = rule("I1&I2", 2).decompose(&[2.0, -1.0]).unwrap();
        assert_eq!(d.x_supp, vec![2.0, -1.0]);
        assert_eq!(d.x_perp, vec![0.0, 0.0]);
        let d = rule("I1 & (I2|!I2)", 2).decompose(&[1.0, 5.0]).unwrap();
        assert_eq!(d.x_supp, vec![1.0, 0.0]);
    }

    #[test]
    fn combine_and_negate() {
        let a = rule("I1", 2);
        let b = rule("I2", 2);
        assert!(a.combine(&b, BoolOp::And).unwrap().evaluate(&[1.0, 1.0]).unwrap());
        assert!(!a.negate().evaluate(&[1.0, -3.0]).unwrap());
        let shifted = rule("I2 @ c=(0, 1)", 2);
        assert_eq!(a.combine(&shifted, BoolOp::Or).unwrap_err(), RuleError::CutoffMismatch);
        assert!(matches!(
            a.combine(&rule("I1", 3), BoolOp::Or),
            Err(RuleError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn direct_sum_examples() {
        let g = rule("I1", 2);
        assert!(supports_direct_sum(&g, &rule("I2", 2), BoolOp::And).unwrap());
        assert!(!supports_direct_sum(&g, &rule("I1&I2", 2), BoolOp::And).unwrap());
        assert!(supports_direct_sum(&rule("I1&(I2|!I2)", 2), &rule("I2", 2), BoolOp::And).unwrap());
    }

    #[test]
    fn json_round_trip() {
        let r = rule("(I1 & I2) | !I3 @ c=(0.5, 0, -2)", 3);
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(text, r#"{"expr":"I1 & I2 | !I3","cutoff":[0.5,0.0,-2.0],"dim":3}"#);
        let back: CutoffRule = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        assert!(serde_json::from_str::<CutoffRule>(r#"{"expr":"I4","cutoff":[0],"dim":1}"#).is_err());
    }
}
