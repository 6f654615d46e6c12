//! The cost over (macro-F1, rejection rate, mean score) and the searches over
//! the filtering threshold that minimise it.
//!
//! Every search takes an objective `FnMut(t_f) -> Result<CostBreakdown>` that
//! returns the best breakdown for `t_f` over the rejection grid, so the same
//! code runs against a [`SplitEvaluator`] or a synthetic cost surface.

mod evaluator;
mod strategies;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use evaluator::{SplitEvaluator, SplitOutcome, SplitProtocol};
pub use strategies::{
    brute_force, grid_search, heuristic_search, simulated_annealing, snap, write_trace_csv,
    AnnealConfig, HeuristicConfig, SearchResult, TraceRow,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub w_p: f64,
    pub w_r: f64,
    pub w_c: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            w_p: 4.0,
            w_r: 1.0,
            w_c: 1.0,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.w_p, self.w_r, self.w_c];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || all.iter().all(|&w| w == 0.0) {
            return Err(Error::Config(
                "cost weights must be finite, >= 0 and not all zero".into(),
            ));
        }
        Ok(())
    }
}

/// `w_p (1 - F1) + w_r R_r + w_c (1 - C)`.
pub fn cost(macro_f1: f64, rejection_rate: f64, mean_score: f64, weights: &CostWeights) -> f64 {
    weights.w_p * (1.0 - macro_f1) + weights.w_r * rejection_rate + weights.w_c * (1.0 - mean_score)
}

pub fn rejection_rate(n_classified: usize, n_total: usize) -> Result<f64> {
    if n_total == 0 {
        return Err(Error::Data("rejection rate of an empty set".into()));
    }
    if n_classified > n_total {
        return Err(Error::Data(format!(
            "{n_classified} classified out of {n_total}"
        )));
    }
    Ok(1.0 - n_classified as f64 / n_total as f64)
}

/// Rejection threshold that accepts every prediction.
pub const ACCEPT_ALL: f64 = 0.5;

/// `{0.50, 0.52, …, 1.00}`.
pub fn rejection_grid() -> Vec<f64> {
    (0..=25).map(|i| (50 + 2 * i) as f64 / 100.0).collect()
}

/// `{0, 0.1, …, 0.5}`.
pub fn default_filter_grid() -> Vec<f64> {
    (0..=5).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub t_f: f64,
    pub t_r: f64,
    pub macro_f1: f64,
    pub rejection_rate: f64,
    pub mean_score: f64,
    pub cost: f64,
    pub n_splits_averaged: usize,
    /// Splits in which no validation instance was accepted.
    #[serde(default)]
    pub zero_accept_splits: usize,
}

impl CostBreakdown {
    pub fn new(
        t_f: f64,
        t_r: f64,
        macro_f1: f64,
        rejection_rate: f64,
        mean_score: f64,
        weights: &CostWeights,
    ) -> Self {
        CostBreakdown {
            t_f,
            t_r,
            macro_f1,
            rejection_rate,
            mean_score,
            cost: cost(macro_f1, rejection_rate, mean_score, weights),
            n_splits_averaged: 1,
            zero_accept_splits: 0,
        }
    }

    /// Lower cost wins; equal costs prefer smaller `t_f`, then smaller `t_r`.
    pub fn better_than(&self, other: &CostBreakdown) -> bool {
        self.cost < other.cost
            || (self.cost == other.cost && (self.t_f, self.t_r) < (other.t_f, other.t_r))
    }
}

/// Argmin over `grid`; ties (within 1e-12) go to the smaller `t_r`
/// regardless of the order `grid` is given in.
pub fn best_over_grid(
    grid: &[f64],
    mut at: impl FnMut(f64) -> CostBreakdown,
) -> Result<CostBreakdown> {
    if grid.is_empty() {
        return Err(Error::Config("rejection grid is empty".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<CostBreakdown> = None;
    for t_r in sorted {
        let b = at(t_r);
        if best.as_ref().is_none_or(|cur| b.cost < cur.cost - 1e-12) {
            best = Some(b);
        }
    }
    Ok(best.expect("grid is non-empty"))
}

fn cache_key(t_f: f64) -> i64 {
    (t_f * 1e9).round() as i64
}

/// Memoises an objective by `t_f`.
pub struct CachedObjective<F> {
    inner: F,
    cache: HashMap<i64, CostBreakdown>,
    evaluations: usize,
}

impl<F: FnMut(f64) -> Result<CostBreakdown>> CachedObjective<F> {
    pub fn new(inner: F) -> Self {
        CachedObjective {
            inner,
            cache: HashMap::new(),
            evaluations: 0,
        }
    }

    pub fn eval(&mut self, t_f: f64) -> Result<CostBreakdown> {
        if let Some(b) = self.cache.get(&cache_key(t_f)) {
            return Ok(b.clone());
        }
        let b = (self.inner)(t_f)?;
        self.evaluations += 1;
        self.cache.insert(cache_key(t_f), b.clone());
        Ok(b)
    }

    /// Distinct `t_f` values evaluated so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }
}
