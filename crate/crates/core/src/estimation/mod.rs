//! Local-linear regression discontinuity estimation.

pub mod bandwidth;
mod estimate;
pub mod kernel;
pub mod local;
mod plot;
mod scores;
mod validation;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bandwidth::{select_bandwidth, BandwidthSpec};
pub use kernel::Kernel;
pub use estimate::{
    direction_diagnostic, estimate, fuzzy_estimate, sharp_estimate, subset_estimate, Design, DirectionDiagnostic,
    EstimatorSpec, RdEstimate, RdSample, WEAK_JUMP, Z_975,
};
pub use local::{local_linear_jump, LinearJump, LocalPoly, RdWeights};
pub use plot::{rd_plot_data, FitSegment, PlotBin, RdPlot};
pub use scores::{binding_score, euclidean_score, sample_sd};
pub use validation::{pseudo_cutoff_test, PseudoCutoffRow};

use crate::adjustment_learners::LearnerError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// Right side is `x > 0`; ties at the cutoff belong to the left side.
    pub fn contains(self, x: f64) -> bool {
        match self {
            Side::Left => x <= 0.0,
            Side::Right => x > 0.0,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("insufficient support on the {side:?} side: need {needed} distinct scores in the window, got {got}")]
    InsufficientSupport { side: Side, needed: usize, got: usize },
    #[error("invalid bandwidth {0}")]
    InvalidBandwidth(f64),
    #[error("singular local design")]
    Singular,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("degenerate score distribution")]
    DegenerateScore,
    #[error("too few observations for bandwidth selection: need {needed}, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("weak identification: treatment jump {jump_d:.6} (outcome jump {jump_y:.6}) is within 0.01 of zero")]
    WeakIdentification { jump_y: f64, jump_d: f64 },
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error("{0}")]
    Invalid(String),
}
