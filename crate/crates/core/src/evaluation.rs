//! Selective-classification metrics computed over accepted predictions only.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::selective::{decide, ScoreKind, ScoredBatch, ScoredPrediction, SelectiveModel};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectiveMetrics {
    pub precision_0: f64,
    pub precision_1: f64,
    pub recall_0: f64,
    pub recall_1: f64,
    pub f1_0: f64,
    pub f1_1: f64,
    pub macro_f1: f64,
    pub acceptance_0: f64,
    pub acceptance_1: f64,
    pub mean_score: f64,
    pub n_total: usize,
    pub n_accepted: usize,
    pub accepted_0: usize,
    pub accepted_1: usize,
    /// Metrics whose denominator was zero and were reported as 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

impl SelectiveMetrics {
    pub fn rejection_rate(&self) -> f64 {
        if self.n_total == 0 {
            0.0
        } else {
            1.0 - self.n_accepted as f64 / self.n_total as f64
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        1.0 - self.rejection_rate()
    }
}

fn ratio(num: usize, den: usize, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Metrics from parallel arrays of true labels, predicted labels and
/// accept flags, with `scores` averaged over the accepted rows.
pub fn metrics_from_parts(
    truth: &[u8],
    predicted: &[u8],
    accepted: &[bool],
    scores: &[f64],
) -> SelectiveMetrics {
    let mut tp = [0usize; 2];
    let mut predicted_as = [0usize; 2];
    let mut accepted_of = [0usize; 2];
    let mut total_of = [0usize; 2];
    let mut score_sum = 0.0;
    for i in 0..truth.len() {
        let y = truth[i] as usize;
        total_of[y] += 1;
        if !accepted[i] {
            continue;
        }
        accepted_of[y] += 1;
        predicted_as[predicted[i] as usize] += 1;
        if predicted[i] == truth[i] {
            tp[y] += 1;
        }
        score_sum += scores[i];
    }
    let n_accepted = accepted_of[0] + accepted_of[1];
    let mut undefined = Vec::new();
    let precision_0 = ratio(tp[0], predicted_as[0], "precision_0", &mut undefined);
    let precision_1 = ratio(tp[1], predicted_as[1], "precision_1", &mut undefined);
    let recall_0 = ratio(tp[0], accepted_of[0], "recall_0", &mut undefined);
    let recall_1 = ratio(tp[1], accepted_of[1], "recall_1", &mut undefined);
    let acceptance_0 = ratio(accepted_of[0], total_of[0], "acceptance_0", &mut undefined);
    let acceptance_1 = ratio(accepted_of[1], total_of[1], "acceptance_1", &mut undefined);
    let mean_score = ratio(1, n_accepted, "mean_score", &mut undefined) * score_sum;
    let (f1_0, f1_1) = (f1(precision_0, recall_0), f1(precision_1, recall_1));
    SelectiveMetrics {
        precision_0,
        precision_1,
        recall_0,
        recall_1,
        f1_0,
        f1_1,
        macro_f1: 0.5 * (f1_0 + f1_1),
        acceptance_0,
        acceptance_1,
        mean_score,
        n_total: truth.len(),
        n_accepted,
        accepted_0: accepted_of[0],
        accepted_1: accepted_of[1],
        undefined,
    }
}

/// Metrics of a scored batch with true labels `truth` at threshold `t_r`.
pub fn metrics_at(batch: &ScoredBatch, truth: &[u8], t_r: f64) -> SelectiveMetrics {
    let accepted: Vec<bool> = batch
        .scores
        .iter()
        .map(|&s| decide(s, t_r).is_accepted())
        .collect();
    metrics_from_parts(truth, &batch.predicted, &accepted, &batch.scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision_0: f64,
    pub precision_1: f64,
    pub recall_0: f64,
    pub recall_1: f64,
}

/// Per-class precision and recall over accepted predictions, matched to
/// `truth` by instance id.
pub fn per_class_precision_recall(
    predictions: &[ScoredPrediction],
    truth: &HashMap<String, u8>,
) -> Result<(PrecisionRecall, Vec<String>)> {
    let mut t = Vec::with_capacity(predictions.len());
    for p in predictions {
        match truth.get(&p.instance_id) {
            Some(&y) => t.push(y),
            None => {
                return Err(Error::Data(format!(
                    "no true label for prediction `{}`",
                    p.instance_id
                )))
            }
        }
    }
    let predicted: Vec<u8> = predictions.iter().map(|p| p.predicted_label).collect();
    let accepted: Vec<bool> = predictions
        .iter()
        .map(|p| p.decision.is_accepted())
        .collect();
    let scores: Vec<f64> = predictions.iter().map(|p| p.score).collect();
    let m = metrics_from_parts(&t, &predicted, &accepted, &scores);
    let undefined = m
        .undefined
        .iter()
        .filter(|n| n.starts_with("precision") || n.starts_with("recall"))
        .cloned()
        .collect();
    Ok((
        PrecisionRecall {
            precision_0: m.precision_0,
            precision_1: m.precision_1,
            recall_0: m.recall_0,
            recall_1: m.recall_1,
        },
        undefined,
    ))
}

pub fn macro_f1(pr: &PrecisionRecall) -> f64 {
    0.5 * (f1(pr.precision_0, pr.recall_0) + f1(pr.precision_1, pr.recall_1))
}

pub fn selective_evaluate(
    model: &SelectiveModel,
    test: &Dataset,
    t_r: f64,
    kind: ScoreKind,
) -> Result<SelectiveMetrics> {
    let batch = model.score(test, kind)?;
    Ok(metrics_at(&batch, test.labels(), t_r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub t_r: f64,
    pub macro_f1: f64,
    pub acceptance_rate: f64,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub t_f: f64,
    pub points: Vec<TradeoffPoint>,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config(
            "rejection grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

pub fn curve_from_batch(
    batch: &ScoredBatch,
    truth: &[u8],
    t_r_grid: &[f64],
    t_f: f64,
) -> Result<TradeoffCurve> {
    check_grid(t_r_grid)?;
    let points = t_r_grid
        .iter()
        .map(|&t_r| {
            let m = metrics_at(batch, truth, t_r);
            TradeoffPoint {
                t_r,
                macro_f1: m.macro_f1,
                acceptance_rate: m.acceptance_rate(),
                mean_score: m.mean_score,
            }
        })
        .collect();
    Ok(TradeoffCurve { t_f, points })
}

pub fn tradeoff_curve(
    model: &SelectiveModel,
    eval_set: &Dataset,
    t_r_grid: &[f64],
    kind: ScoreKind,
    t_f: f64,
) -> Result<TradeoffCurve> {
    let batch = model.score(eval_set, kind)?;
    curve_from_batch(&batch, eval_set.labels(), t_r_grid, t_f)
}

impl TradeoffCurve {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t_f", "t_r", "macro_f1", "acceptance_rate", "mean_score"])?;
        for p in &self.points {
            w.write_record([
                self.t_f.to_string(),
                p.t_r.to_string(),
                p.macro_f1.to_string(),
                p.acceptance_rate.to_string(),
                p.mean_score.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    /// Filtering measure (`IH`, `IF` or `--`).
    pub filter: String,
    /// Rejection criterion (`C`, `U` or `--`).
    pub reject: String,
    pub t_f: Option<f64>,
    pub t_r: Option<f64>,
    pub metrics: SelectiveMetrics,
    #[serde(default)]
    pub annotation: String,
}

pub const TABLE_HEADER: [&str; 12] = [
    "F",
    "R",
    "T_f",
    "T_r",
    "PRC_0",
    "PRC_1",
    "RCL_0",
    "RCL_1",
    "ACP_0",
    "ACP_1",
    "score",
    "annotation",
];

fn fmt3(v: f64) -> String {
    format!("{v:.3}")
}

impl TableRow {
    pub fn record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or_else(|| "--".to_string(), fmt3);
        let m = &self.metrics;
        vec![
            self.filter.clone(),
            self.reject.clone(),
            opt(self.t_f),
            opt(self.t_r),
            fmt3(m.precision_0),
            fmt3(m.precision_1),
            fmt3(m.recall_0),
            fmt3(m.recall_1),
            fmt3(m.acceptance_0),
            fmt3(m.acceptance_1),
            fmt3(m.mean_score),
            self.annotation.clone(),
        ]
    }
}

pub fn write_table_csv(rows: &[TableRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TABLE_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selective::Decision;

    fn pred(id: &str, label: u8, score: f64, accepted: bool) -> ScoredPrediction {
        ScoredPrediction {
            instance_id: id.into(),
            predicted_label: label,
            score,
            score_kind: ScoreKind::Confidence,
            decision: if accepted {
                Decision::Accepted
            } else {
                Decision::Rejected
            },
            t_r: 0.5,
        }
    }

    #[test]
    fn perfect_predictions() {
        let preds = vec![pred("a", 0, 0.9, true), pred("b", 1, 0.8, true)];
        let truth = HashMap::from([("a".to_string(), 0), ("b".to_string(), 1)]);
        let (pr, undefined) = per_class_precision_recall(&preds, &truth).unwrap();
        assert_eq!(
            (pr.precision_0, pr.precision_1, pr.recall_0, pr.recall_1),
            (1.0, 1.0, 1.0, 1.0)
        );
        assert!(undefined.is_empty());
    }

    #[test]
    fn macro_is_mean_of_class_f1() {
        let pr = PrecisionRecall {
            precision_0: 1.0,
            recall_0: 1.0,
            precision_1: 0.5,
            recall_1: 0.5,
        };
        assert!((macro_f1(&pr) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn zero_accepted_is_all_zero_and_flagged() {
        let m = metrics_from_parts(&[0, 1, 1], &[0, 1, 0], &[false; 3], &[0.6, 0.7, 0.8]);
        assert_eq!(
            (
                m.macro_f1,
                m.precision_0,
                m.recall_1,
                m.mean_score,
                m.n_accepted
            ),
            (0.0, 0.0, 0.0, 0.0, 0)
        );
        assert!(m.undefined.contains(&"precision_0".to_string()));
        assert_eq!(m.rejection_rate(), 1.0);
    }

    #[test]
    fn missing_truth_is_an_error() {
        let preds = vec![pred("zz", 0, 0.9, true)];
        assert!(per_class_precision_recall(&preds, &HashMap::new()).is_err());
    }

    #[test]
    fn table_row_formatting() {
        let row = TableRow {
            filter: "--".into(),
            reject: "--".into(),
            t_f: None,
            t_r: Some(0.9),
            metrics: SelectiveMetrics::default(),
            annotation: String::new(),
        };
        assert_eq!(row.record()[2..5], ["--", "0.900", "0.000"]);
    }
}
