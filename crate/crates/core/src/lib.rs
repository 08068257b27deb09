//! Multi-score regression discontinuity: cutoff-rule algebra, unit
//! classification, a simulated rework process, learners for covariate
//! adjustment, local-linear estimation and a Monte Carlo harness.

pub mod adjustment_learners;
pub mod estimation;
pub mod led_dgp;
pub mod mc_harness;
pub mod panel;
pub mod predicate;
pub mod rule_algebra;
pub mod seeding;
pub mod synthetic;
pub mod unit_classification;

pub use adjustment_learners::{FitReport, LearnerKind, LearnerSpec};
pub use estimation::{Design, EstimatorSpec, Kernel, RdEstimate, RdSample};
pub use led_dgp::{Axis, LotConfig, OperatorPolicy, SimPanel};
pub use mc_harness::{ExperimentConfig, MetricsRow};
pub use panel::Panel;
pub use predicate::{Predicate, PredicateError, RowView};
pub use rule_algebra::{BoolExpr, BoolOp, CutoffRule, RuleError, ScoreVector};
pub use unit_classification::{
    classify_cutoff, classify_general, ClassificationError, ClassificationResult, GridSpec,
    PairClassifier, UnitCategory,
};
