//! Two-step reliability for binary classifiers: drop the hardest training
//! instances, then abstain on low-confidence or high-uncertainty predictions,
//! with both thresholds chosen by minimising a cost over macro-F1, rejection
//! rate and mean score.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod error;
pub mod evaluation;
pub mod hardness;
pub mod learners;
mod linalg;
pub mod pipeline;
pub mod search;
pub mod seeds;
pub mod selective;

pub use data::{Dataset, FilterMode, SplitPair};
pub use error::{Error, ErrorKind, Result};
pub use hardness::{CvProtocol, HardnessMethod, HardnessScores};
pub use learners::{LearnerKind, LearnerSpec, MainModelConfig, TrainedModel};
pub use pipeline::{ExperimentConfig, FilterMethod, RejectMethod, RunManifest};
pub use search::{CostBreakdown, CostWeights};
pub use selective::{
    CalibrationParams, Decision, ScoreKind, ScoredPrediction, SelectiveModel,
    UncertaintyEnsembleSpec,
};
