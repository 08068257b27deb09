use std::collections::BTreeSet;
use std::fmt;

/// Boolean expression over indicator atoms `I1..IK`.
///
/// Atoms are 1-based. `And`/`Or` are n-ary; the parser never produces them
/// with fewer than two children.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BoolExpr {
    Const(bool),
    Atom(usize),
    Not(Box<BoolExpr>),
    And(Vec<BoolExpr>),
    Or(Vec<BoolExpr>),
}

impl BoolExpr {
    pub fn atom(k: usize) -> Self {
        BoolExpr::Atom(k)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: BoolExpr) -> Self {
        BoolExpr::Not(Box::new(e))
    }

    pub fn and(children: impl IntoIterator<Item = BoolExpr>) -> Self {
        BoolExpr::And(children.into_iter().collect())
    }

    pub fn or(children: impl IntoIterator<Item = BoolExpr>) -> Self {
        BoolExpr::Or(children.into_iter().collect())
    }

    /// Evaluates the expression; bit `k - 1` of `bits` is the value of atom `k`.
    pub fn eval(&self, bits: u64) -> bool {
        match self {
            BoolExpr::Const(b) => *b,
            BoolExpr::Atom(k) => (bits >> (k - 1)) & 1 == 1,
            BoolExpr::Not(e) => !e.eval(bits),
            BoolExpr::And(es) => es.iter().all(|e| e.eval(bits)),
            BoolExpr::Or(es) => es.iter().any(|e| e.eval(bits)),
        }
    }

    /// Atom indices that occur syntactically in the expression.
    pub fn atoms(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<usize>) {
        match self {
            BoolExpr::Const(_) => {}
            BoolExpr::Atom(k) => {
                out.insert(*k);
            }
            BoolExpr::Not(e) => e.collect_atoms(out),
            BoolExpr::And(es) | BoolExpr::Or(es) => es.iter().for_each(|e| e.collect_atoms(out)),
        }
    }

    pub fn max_atom(&self) -> Option<usize> {
        self.atoms().into_iter().next_back()
    }

    fn precedence(&self) -> u8 {
        match self {
            BoolExpr::Or(_) => 1,
            BoolExpr::And(_) => 2,
            _ => 3,
        }
    }

    fn fmt_child(&self, child: &BoolExpr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Same-precedence children are parenthesized so that printing and
        // re-parsing keeps the tree shape (the parser flattens chains).
        if child.precedence() <= self.precedence() {
            write!(f, "({child})")
        } else {
            write!(f, "{child}")
        }
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoolExpr::Const(b) => write!(f, "{}", u8::from(*b)),
            BoolExpr::Atom(k) => write!(f, "I{k}"),
            BoolExpr::Not(e) => {
                write!(f, "!")?;
                if e.precedence() < 3 {
                    write!(f, "({e})")
                } else {
                    write!(f, "{e}")
                }
            }
            BoolExpr::And(es) | BoolExpr::Or(es) => {
                let sep = if matches!(self, BoolExpr::And(_)) { " & " } else { " | " };
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    self.fmt_child(e, f)?;
                }
                Ok(())
            }
        }
    }
}

/// Exhaustive truth table of an expression over the atoms it mentions.
#[derive(Clone, Debug)]
pub struct TruthTable {
    /// Atom indices (1-based, ascending); column `j` of the table is `atoms[j]`.
    pub atoms: Vec<usize>,
    values: Vec<bool>,
}

impl TruthTable {
    pub(crate) fn build(expr: &BoolExpr, atoms: Vec<usize>) -> Self {
        let n = atoms.len();
        let values = (0..1u64 << n)
            .map(|mask| expr.eval(scatter(mask, &atoms)))
            .collect();
        TruthTable { atoms, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at a compact assignment (bit `j` is the value of `atoms[j]`).
    pub fn value(&self, mask: u64) -> bool {
        self.values[mask as usize]
    }

    /// Whether the function changes when column `j` flips for some
    /// assignment of the other columns.
    pub fn depends_on(&self, j: usize) -> bool {
        let bit = 1usize << j;
        (0..self.values.len())
            .filter(|m| m & bit == 0)
            .any(|m| self.values[m] != self.values[m | bit])
    }
}

/// Spreads a compact mask over the given 1-based atom indices.
pub(crate) fn scatter(mask: u64, atoms: &[usize]) -> u64 {
    atoms
        .iter()
        .enumerate()
        .filter(|(j, _)| (mask >> j) & 1 == 1)
        .fold(0u64, |acc, (_, &k)| acc | (1u64 << (k - 1)))
}
