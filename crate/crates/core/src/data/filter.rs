use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::hardness::HardnessScores;

/// How the filtering threshold is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Remove the `ceil(t_f * n_class)` hardest instances of each class; `t_f ∈ [0, 0.5]`.
    #[default]
    FractionPerClass,
    /// Remove every instance whose hardness exceeds `t_f`; `t_f ∈ [0, 1]`.
    ScoreThreshold,
}

/// Number of rows removed from a class of `n` instances at fraction `t_f`.
pub fn removed_count(t_f: f64, n: usize) -> usize {
    // Guard against products such as 0.3 * 10 = 3.0000000000000004.
    let raw = t_f * n as f64;
    ((raw - 1e-9).ceil().max(0.0) as usize).min(n)
}

pub fn filter_by_hardness(
    ds: &Dataset,
    scores: &HardnessScores,
    t_f: f64,
    mode: FilterMode,
) -> Result<Dataset> {
    let mut score_of = Vec::with_capacity(ds.len());
    for id in ds.ids() {
        match scores.get(id) {
            Some(s) => score_of.push(s),
            None => return Err(Error::MissingScore(id.clone())),
        }
    }
    let keep: Vec<usize> = match mode {
        FilterMode::FractionPerClass => {
            if !(0.0..=0.5).contains(&t_f) {
                return Err(Error::Config(format!(
                    "fraction t_f = {t_f} outside [0, 0.5]"
                )));
            }
            let mut removed = vec![false; ds.len()];
            for mut members in ds.indices_by_class() {
                // Hardest first; equal scores fall back to ascending id.
                members.sort_by(|&a, &b| {
                    score_of[b]
                        .total_cmp(&score_of[a])
                        .then_with(|| ds.ids()[a].cmp(&ds.ids()[b]))
                });
                let k = removed_count(t_f, members.len());
                for &i in &members[..k] {
                    removed[i] = true;
                }
            }
            (0..ds.len()).filter(|&i| !removed[i]).collect()
        }
        FilterMode::ScoreThreshold => {
            if !(0.0..=1.0).contains(&t_f) {
                return Err(Error::Config(format!("score t_f = {t_f} outside [0, 1]")));
            }
            (0..ds.len()).filter(|&i| score_of[i] <= t_f).collect()
        }
    };
    Ok(ds.select(&keep))
}
