use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{best_over_grid, rejection_grid, CostBreakdown, CostWeights, ACCEPT_ALL};
use crate::data::{
    filter_by_hardness, maybe_undersample, stratified_split, Dataset, FilterMode,
    DEFAULT_TRIGGER_RATIO,
};
use crate::error::{Error, Result, ResultExt};
use crate::evaluation::{metrics_at, SelectiveMetrics};
use crate::hardness::HardnessScores;
use crate::learners::MainModelConfig;
use crate::seeds::{derive_seed, Stream};
use crate::selective::{
    ScoreKind, ScoredBatch, SelectiveModel, UncertaintyEnsembleSpec, DEFAULT_CALIBRATION_FOLDS,
};

/// Seeded train/validation splits used to score threshold candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitProtocol {
    pub seeds: Vec<u64>,
    pub ratio: f64,
    pub trigger_ratio: f64,
    pub calibration_folds: usize,
}

impl Default for SplitProtocol {
    fn default() -> Self {
        SplitProtocol {
            seeds: (0..5).collect(),
            ratio: 0.7,
            trigger_ratio: DEFAULT_TRIGGER_RATIO,
            calibration_folds: DEFAULT_CALIBRATION_FOLDS,
        }
    }
}

impl SplitProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config(
                "split protocol needs at least one seed".into(),
            ));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::Config(format!(
                "split ratio {} outside (0, 1)",
                self.ratio
            )));
        }
        if self.calibration_folds < 2 {
            return Err(Error::Config("calibration needs at least 2 folds".into()));
        }
        Ok(())
    }
}

/// A fitted split: validation labels and the scored validation batch.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub seed: u64,
    pub train_size: usize,
    pub truth: Vec<u8>,
    pub batch: ScoredBatch,
}

impl SplitOutcome {
    pub fn metrics_at(&self, t_r: f64) -> SelectiveMetrics {
        metrics_at(&self.batch, &self.truth, t_r)
    }
}

/// Mean breakdown over splits at one `(t_f, t_r)`.
pub fn breakdown(
    outcomes: &[SplitOutcome],
    t_f: f64,
    t_r: f64,
    weights: &CostWeights,
) -> CostBreakdown {
    let n = outcomes.len() as f64;
    let (mut f1, mut rr, mut ms, mut zero) = (0.0, 0.0, 0.0, 0);
    for o in outcomes {
        let m = o.metrics_at(t_r);
        f1 += m.macro_f1;
        rr += m.rejection_rate();
        ms += m.mean_score;
        if m.n_accepted == 0 {
            zero += 1;
        }
    }
    CostBreakdown {
        n_splits_averaged: outcomes.len(),
        zero_accept_splits: zero,
        ..CostBreakdown::new(t_f, t_r, f1 / n, rr / n, ms / n, weights)
    }
}

/// Scores threshold candidates by filtering, fitting and validating on each split.
#[derive(Debug, Clone)]
pub struct SplitEvaluator<'a> {
    pub data: &'a Dataset,
    pub scores: Option<&'a HardnessScores>,
    pub mode: FilterMode,
    /// `None` accepts every prediction; `kind` still feeds the cost.
    pub rejector: Option<ScoreKind>,
    /// Score reported and averaged, whether or not it is thresholded.
    pub kind: ScoreKind,
    pub model: MainModelConfig,
    pub ensemble: UncertaintyEnsembleSpec,
    pub protocol: SplitProtocol,
    pub weights: CostWeights,
    pub t_r_grid: Vec<f64>,
}

impl<'a> SplitEvaluator<'a> {
    pub fn new(
        data: &'a Dataset,
        model: MainModelConfig,
        protocol: SplitProtocol,
        weights: CostWeights,
    ) -> Self {
        SplitEvaluator {
            data,
            scores: None,
            mode: FilterMode::FractionPerClass,
            rejector: None,
            kind: ScoreKind::Confidence,
            model,
            ensemble: UncertaintyEnsembleSpec::default(),
            protocol,
            weights,
            t_r_grid: rejection_grid(),
        }
    }

    pub fn with_filter(mut self, scores: &'a HardnessScores, mode: FilterMode) -> Self {
        self.scores = Some(scores);
        self.mode = mode;
        self
    }

    pub fn with_rejector(mut self, kind: ScoreKind) -> Self {
        self.rejector = Some(kind);
        self.kind = kind;
        self
    }

    /// Scores with `kind` without rejecting anything.
    pub fn with_score_kind(mut self, kind: ScoreKind) -> Self {
        self.rejector = None;
        self.kind = kind;
        self
    }

    fn split_outcome(&self, t_f: f64, seed: u64) -> Result<SplitOutcome> {
        let pair = stratified_split(
            self.data,
            self.protocol.ratio,
            derive_seed(seed, Stream::Split, 0),
        )?;
        let train = match self.scores {
            Some(s) => filter_by_hardness(&pair.train, s, t_f, self.mode)?,
            None if t_f == 0.0 => pair.train,
            None => return Err(Error::Config(format!("t_f = {t_f} needs hardness scores"))),
        };
        if train.is_empty() {
            return Err(Error::Data(format!(
                "filtering at t_f = {t_f} left no training data"
            )));
        }
        if !train.has_both_classes() {
            return Err(Error::SingleClass(format!(
                "training data filtered at t_f = {t_f}"
            )));
        }
        let train = maybe_undersample(
            &train,
            self.protocol.trigger_ratio,
            derive_seed(seed, Stream::Undersample, 0),
        )?;
        let kind = self.kind;
        let ensemble = (kind == ScoreKind::Certainty).then_some(&self.ensemble);
        let model = SelectiveModel::fit(
            &train,
            &self.model,
            self.protocol.calibration_folds,
            ensemble,
        )?;
        Ok(SplitOutcome {
            seed,
            train_size: train.len(),
            truth: pair.validation.labels().to_vec(),
            batch: model.score(&pair.validation, kind)?,
        })
    }

    /// Fits one model per split at `t_f`.
    pub fn outcomes(&self, t_f: f64) -> Result<Vec<SplitOutcome>> {
        self.protocol.validate()?;
        self.protocol
            .seeds
            .par_iter()
            .map(|&seed| {
                self.split_outcome(t_f, seed)
                    .context_with(|| format!("split seed {seed}, t_f {t_f}"))
            })
            .collect()
    }

    pub fn evaluate_pair(&self, t_f: f64, t_r: f64) -> Result<CostBreakdown> {
        Ok(breakdown(&self.outcomes(t_f)?, t_f, t_r, &self.weights))
    }

    /// Rejection thresholds scanned for this evaluator.
    pub fn rejection_candidates(&self) -> Vec<f64> {
        match self.rejector {
            Some(_) => self.t_r_grid.clone(),
            None => vec![ACCEPT_ALL],
        }
    }

    pub fn best_for_outcomes(&self, outcomes: &[SplitOutcome], t_f: f64) -> Result<CostBreakdown> {
        best_over_grid(&self.rejection_candidates(), |t_r| {
            breakdown(outcomes, t_f, t_r, &self.weights)
        })
    }

    /// The rejection threshold minimising cost at `t_f`, ties to the smaller `t_r`.
    pub fn best_rejection_for(&self, t_f: f64) -> Result<CostBreakdown> {
        let outcomes = self.outcomes(t_f)?;
        self.best_for_outcomes(&outcomes, t_f)
    }

    pub fn objective(&self) -> impl FnMut(f64) -> Result<CostBreakdown> + '_ {
        move |t_f| self.best_rejection_for(t_f)
    }
}
