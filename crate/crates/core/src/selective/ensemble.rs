use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::{fit, BoostingParams, LearnerKind, LearnerSpec, TrainedModel};

pub const ENSEMBLE_SIZE: usize = 10;
pub const MEMBER_ESTIMATORS: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub max_depth: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UncertaintyEnsembleSpec {
    pub members: Vec<EnsembleMember>,
    pub n_estimators: usize,
}

const DEFAULT_MEMBERS: [(usize, f64, f64, f64, u64); ENSEMBLE_SIZE] = [
    (3, 0.10, 0.80, 0.80, 0),
    (4, 0.05, 0.70, 1.00, 1),
    (5, 0.20, 1.00, 0.60, 2),
    (6, 0.10, 0.90, 0.90, 3),
    (3, 0.30, 0.60, 0.70, 4),
    (4, 0.15, 0.85, 1.00, 5),
    (5, 0.07, 0.75, 0.85, 6),
    (6, 0.10, 0.65, 0.90, 7),
    (3, 0.20, 0.95, 0.60, 8),
    (4, 0.10, 0.80, 0.95, 9),
];

impl Default for UncertaintyEnsembleSpec {
    fn default() -> Self {
        UncertaintyEnsembleSpec {
            members: DEFAULT_MEMBERS
                .iter()
                .map(
                    |&(max_depth, learning_rate, subsample, colsample_bytree, seed)| {
                        EnsembleMember {
                            max_depth,
                            learning_rate,
                            subsample,
                            colsample_bytree,
                            seed,
                        }
                    },
                )
                .collect(),
            n_estimators: MEMBER_ESTIMATORS,
        }
    }
}

impl UncertaintyEnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.members.len() != ENSEMBLE_SIZE {
            return Err(Error::Config(format!(
                "ensemble size must be {ENSEMBLE_SIZE}, got {}",
                self.members.len()
            )));
        }
        for s in self.member_specs() {
            s.kind.validate()?;
        }
        Ok(())
    }

    pub fn member_specs(&self) -> Vec<LearnerSpec> {
        self.members
            .iter()
            .map(|m| LearnerSpec {
                kind: LearnerKind::GradientBoosting(BoostingParams {
                    n_estimators: self.n_estimators,
                    learning_rate: m.learning_rate,
                    max_depth: m.max_depth,
                    subsample: m.subsample,
                    colsample_bytree: m.colsample_bytree,
                    ..BoostingParams::default()
                }),
                seed: m.seed,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyEnsemble {
    members: Vec<TrainedModel>,
}

pub fn fit_uncertainty_ensemble(
    train: &Dataset,
    spec: &UncertaintyEnsembleSpec,
) -> Result<UncertaintyEnsemble> {
    spec.validate()?;
    let members = spec
        .member_specs()
        .par_iter()
        .map(|s| fit(s, train))
        .collect::<Result<Vec<_>>>()?;
    Ok(UncertaintyEnsemble { members })
}

/// Certainty scores of one batch together with the entropy range used to
/// normalise them. Scores are relative to the batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertaintyBatch {
    pub scores: Vec<f64>,
    pub entropy_min: f64,
    pub entropy_max: f64,
    pub degenerate: bool,
}

/// Binary entropy in nats.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// `1 - 0.5 · (H - H_min) / (H_max - H_min)` for the entropy `H` of each
/// row's mean member prediction.
pub fn certainty_from_member_probs(member_probs: &[Vec<f64>]) -> Result<CertaintyBatch> {
    if member_probs.is_empty() {
        return Err(Error::Data(
            "certainty scores need a non-empty batch".into(),
        ));
    }
    let entropies: Vec<f64> = member_probs
        .iter()
        .map(|ps| binary_entropy(ps.iter().sum::<f64>() / ps.len() as f64))
        .collect();
    let lo = entropies.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = entropies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 1e-15 {
        log::warn!("certainty: batch entropy range is zero; every instance gets certainty 1");
        return Ok(CertaintyBatch {
            scores: vec![1.0; entropies.len()],
            entropy_min: lo,
            entropy_max: hi,
            degenerate: true,
        });
    }
    let scores = entropies
        .iter()
        .map(|h| 1.0 - 0.5 * (h - lo) / (hi - lo))
        .collect();
    Ok(CertaintyBatch {
        scores,
        entropy_min: lo,
        entropy_max: hi,
        degenerate: false,
    })
}

impl UncertaintyEnsemble {
    pub fn members(&self) -> &[TrainedModel] {
        &self.members
    }

    /// Positive-class probability of every member for every row.
    pub fn member_probabilities(&self, instances: &Dataset) -> Result<Vec<Vec<f64>>> {
        let per_member = self
            .members
            .iter()
            .map(|m| m.predict_positive_batch(instances))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..instances.len())
            .map(|i| per_member.iter().map(|p| p[i]).collect())
            .collect())
    }
}

pub fn certainty_scores(
    ensemble: &UncertaintyEnsemble,
    instances: &Dataset,
) -> Result<CertaintyBatch> {
    certainty_from_member_probs(&ensemble.member_probabilities(instances)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_extremes() {
        let probs = vec![vec![0.5; 10], vec![0.99; 10], vec![0.8; 10], vec![0.8; 10]];
        let c = certainty_from_member_probs(&probs).unwrap();
        assert_eq!(c.scores[0], 0.5);
        assert_eq!(c.scores[1], 1.0);
        assert_eq!(c.scores[2], c.scores[3]);
        assert!(c.scores.iter().all(|s| (0.5..=1.0).contains(s)));
    }

    #[test]
    fn single_instance_is_degenerate() {
        let c = certainty_from_member_probs(&[vec![0.3; 10]]).unwrap();
        assert!(c.degenerate);
        assert_eq!(c.scores, vec![1.0]);
    }

    #[test]
    fn nine_members_rejected() {
        let mut s = UncertaintyEnsembleSpec::default();
        s.members.pop();
        assert!(s
            .validate()
            .unwrap_err()
            .to_string()
            .contains("ensemble size"));
    }

    #[test]
    fn default_table() {
        let s = UncertaintyEnsembleSpec::default();
        assert_eq!(s.members.len(), 10);
        assert_eq!(s.n_estimators, 15);
        assert_eq!(
            s.members[0],
            EnsembleMember {
                max_depth: 3,
                learning_rate: 0.10,
                subsample: 0.80,
                colsample_bytree: 0.80,
                seed: 0
            }
        );
        assert!(s.validate().is_ok());
    }
}
