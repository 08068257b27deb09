//! Operator decision policies and the categories they induce.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Axis, DgpError, SimPanel};
use crate::rule_algebra::{BoolExpr, CutoffRule};
use crate::unit_classification::{classify_dataset, classify_dataset_general, UnitCategory};

/// How the operator turns the scores into a rework decision.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorPolicy {
    /// Follows the assignment: `D = I_D & I_Y`.
    Acknowledging,
    /// Also vetoes when the overall estimate disagrees: `D = I_D & I_Y & I_E`.
    #[default]
    Cautious,
    /// Decides on the overall estimate only: `D = I_D & I_E`.
    Reasonable,
}

impl OperatorPolicy {
    pub const ALL: [OperatorPolicy; 3] = [OperatorPolicy::Acknowledging, OperatorPolicy::Cautious, OperatorPolicy::Reasonable];

    pub fn name(self) -> &'static str {
        match self {
            OperatorPolicy::Acknowledging => "acknowledging",
            OperatorPolicy::Cautious => "cautious",
            OperatorPolicy::Reasonable => "reasonable",
        }
    }
}

impl fmt::Display for OperatorPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OperatorPolicy::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown policy {s:?} (expected acknowledging, cautious or reasonable)"))
    }
}

/// Rework decision from centered scores; `i_d` is the distance indicator.
pub fn operator_decision(policy: OperatorPolicy, i_d: bool, x_y: f64, x_e: f64) -> bool {
    match policy {
        OperatorPolicy::Acknowledging => i_d && x_y > 0.0,
        OperatorPolicy::Cautious => i_d && x_y > 0.0 && x_e > 0.0,
        OperatorPolicy::Reasonable => i_d && x_e > 0.0,
    }
}

/// Decision as a function of the three centered scores with `x_e - x_y`
/// held at `x_r`. Used to classify against shifted cutoffs.
pub fn decision_bits(policy: OperatorPolicy, p: &[f64], x_r: f64) -> bool {
    match policy {
        OperatorPolicy::Reasonable => p[0] > 0.0 && p[1] + x_r > 0.0,
        _ => operator_decision(policy, p[0] > 0.0, p[1], p[2]),
    }
}

/// The rule a unit is classified against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    /// `T = I_D & I_Y`.
    Assignment,
    /// A single score indicator.
    Axis(Axis),
}

impl Gate {
    fn rule(self) -> CutoffRule {
        let expr = match self {
            Gate::Assignment => BoolExpr::and([BoolExpr::atom(1), BoolExpr::atom(2)]),
            Gate::Axis(Axis::D) => BoolExpr::atom(1),
            Gate::Axis(Axis::Y) => BoolExpr::atom(2),
        };
        CutoffRule::new(expr, 3).expect("static rule")
    }
}

impl FromStr for Gate {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "assignment" => Ok(Gate::Assignment),
            other => other
                .parse::<Axis>()
                .map(Gate::Axis)
                .map_err(|_| format!("unknown gate {other:?} (expected assignment, x_d or x_y)")),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::Assignment => f.write_str("assignment"),
            Gate::Axis(a) => f.write_str(a.column()),
        }
    }
}

/// Categories of every lot relative to `(gate, D)`.
///
/// Acknowledging and cautious decisions are cutoff rules over
/// `(x_d, x_y, x_e)` and are classified exactly. The reasonable operator's
/// overall estimate moves with `x_y`, so it is classified on a grid.
pub fn policy_categories(policy: OperatorPolicy, gate: Gate, panel: &SimPanel) -> Result<Vec<UnitCategory>, DgpError> {
    let rows: Vec<Vec<f64>> = (0..panel.len()).map(|i| panel.scores(i).to_vec()).collect();
    score_categories(policy, gate, &rows, &panel.x_r)
}

/// Same as [`policy_categories`] from bare centered score rows `(x_d, x_y, x_e)`.
/// `x_r` is only read by the reasonable operator.
pub fn score_categories(policy: OperatorPolicy, gate: Gate, rows: &[Vec<f64>], x_r: &[f64]) -> Result<Vec<UnitCategory>, DgpError> {
    if let Some(r) = rows.iter().find(|r| r.len() != 3) {
        return Err(DgpError::Invalid { field: "scores".into(), message: format!("expected 3 scores per row, got {}", r.len()) });
    }
    let t = gate.rule();
    let cats = match policy {
        OperatorPolicy::Acknowledging | OperatorPolicy::Cautious => {
            let mut atoms = vec![BoolExpr::atom(1), BoolExpr::atom(2)];
            if policy == OperatorPolicy::Cautious {
                atoms.push(BoolExpr::atom(3));
            }
            let d = CutoffRule::new(BoolExpr::and(atoms), 3).expect("static rule");
            classify_dataset(&t, &d, rows)?.0
        }
        OperatorPolicy::Reasonable => {
            if x_r.len() != rows.len() {
                return Err(DgpError::Invalid { field: "x_r".into(), message: format!("expected {} values, got {}", rows.len(), x_r.len()) });
            }
            classify_dataset_general(&t, |i, p| decision_bits(policy, p, x_r[i]), rows, 1.0)?.0
        }
    };
    Ok(cats)
}
