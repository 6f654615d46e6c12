//! Calibration, confidence and certainty scores, and the accept/reject rule.

mod calibration;
mod ensemble;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::{fit, MainModelConfig, TrainedModel};

pub use calibration::{
    calibrated_proba, calibration_nll, fit_sigmoid, fit_sigmoid_calibration, out_of_fold_raw,
    CalibrationParams, MAX_SLOPE,
};
pub use ensemble::{
    binary_entropy, certainty_from_member_probs, certainty_scores, fit_uncertainty_ensemble,
    CertaintyBatch, EnsembleMember, UncertaintyEnsemble, UncertaintyEnsembleSpec, ENSEMBLE_SIZE,
    MEMBER_ESTIMATORS,
};

pub const DEFAULT_CALIBRATION_FOLDS: usize = 5;

/// Predicted label and maximum class probability. `p̂ = 0.5` predicts the positive class.
pub fn confidence(calibrated_positive: f64) -> (u8, f64) {
    let label = u8::from(calibrated_positive >= 0.5);
    (label, calibrated_positive.max(1.0 - calibrated_positive))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accepted,
    Rejected,
}

impl Decision {
    pub fn is_accepted(self) -> bool {
        self == Decision::Accepted
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Accepted => "accepted",
            Decision::Rejected => "rejected",
        }
    }
}

pub fn decide(s: f64, t_r: f64) -> Decision {
    if s >= t_r {
        Decision::Accepted
    } else {
        Decision::Rejected
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Confidence,
    Certainty,
}

impl ScoreKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Confidence => "confidence",
            ScoreKind::Certainty => "certainty",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub instance_id: String,
    pub predicted_label: u8,
    pub score: f64,
    pub score_kind: ScoreKind,
    pub decision: Decision,
    pub t_r: f64,
}

pub fn write_predictions_csv(predictions: &[ScoredPrediction], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "instance_id",
        "predicted_label",
        "score",
        "score_kind",
        "decision",
        "t_r",
    ])?;
    for p in predictions {
        w.write_record([
            p.instance_id.clone(),
            p.predicted_label.to_string(),
            p.score.to_string(),
            p.score_kind.as_str().to_string(),
            p.decision.as_str().to_string(),
            p.t_r.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Main model, its calibration, and optionally the uncertainty ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectiveModel {
    pub model: TrainedModel,
    pub calibration: CalibrationParams,
    pub ensemble: Option<UncertaintyEnsemble>,
}

/// Labels and scores for one evaluation batch, before a threshold is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredBatch {
    pub ids: Vec<String>,
    pub predicted: Vec<u8>,
    pub scores: Vec<f64>,
    pub kind: ScoreKind,
    pub certainty_range: Option<(f64, f64)>,
}

impl ScoredBatch {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn predictions(&self, t_r: f64) -> Vec<ScoredPrediction> {
        (0..self.len())
            .map(|i| ScoredPrediction {
                instance_id: self.ids[i].clone(),
                predicted_label: self.predicted[i],
                score: self.scores[i],
                score_kind: self.kind,
                decision: decide(self.scores[i], t_r),
                t_r,
            })
            .collect()
    }
}

impl SelectiveModel {
    pub fn fit(
        train: &Dataset,
        config: &MainModelConfig,
        calibration_folds: usize,
        ensemble: Option<&UncertaintyEnsembleSpec>,
    ) -> Result<Self> {
        config.validate()?;
        let spec = config.spec();
        let model = fit(&spec, train)?;
        let calibration = fit_sigmoid_calibration(&spec, train, calibration_folds)?;
        let ensemble = match ensemble {
            Some(s) => Some(fit_uncertainty_ensemble(train, s)?),
            None => None,
        };
        Ok(SelectiveModel {
            model,
            calibration,
            ensemble,
        })
    }

    pub fn calibrated_positive(&self, data: &Dataset) -> Result<Vec<f64>> {
        Ok(self
            .model
            .predict_positive_batch(data)?
            .into_iter()
            .map(|p| self.calibration.apply(p))
            .collect())
    }

    pub fn score(&self, data: &Dataset, kind: ScoreKind) -> Result<ScoredBatch> {
        let calibrated = self.calibrated_positive(data)?;
        let (predicted, conf): (Vec<u8>, Vec<f64>) =
            calibrated.iter().map(|&p| confidence(p)).unzip();
        let (scores, certainty_range) = match kind {
            ScoreKind::Confidence => (conf, None),
            ScoreKind::Certainty => {
                let ens = self.ensemble.as_ref().ok_or_else(|| {
                    Error::Config("certainty scores need a fitted uncertainty ensemble".into())
                })?;
                let batch = certainty_scores(ens, data)?;
                (batch.scores, Some((batch.entropy_min, batch.entropy_max)))
            }
        };
        Ok(ScoredBatch {
            ids: data.ids().to_vec(),
            predicted,
            scores,
            kind,
            certainty_range,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confidence_examples() {
        assert_eq!(confidence(0.7), (1, 0.7));
        let (l, s) = confidence(0.3);
        assert_eq!(l, 0);
        assert!((s - 0.7).abs() < 1e-15);
        assert_eq!(confidence(0.5), (1, 0.5));
    }

    #[test]
    fn decide_examples() {
        assert_eq!(decide(0.95, 0.94), Decision::Accepted);
        assert_eq!(decide(0.93, 0.94), Decision::Rejected);
        assert_eq!(decide(0.88, 0.88), Decision::Accepted);
    }
}
