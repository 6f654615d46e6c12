//! Gradient-boosted trees for binary log-loss with second-order split
//! finding, per-tree row and column subsampling, depth limit,
//! min-child-weight and a split penalty.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow, ColumnData, GradStats, GrowParams, SecondOrder, Tree};
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostingParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub gamma: f64,
    pub subsample: f64,
    pub colsample_bytree: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
}

impl Default for BoostingParams {
    fn default() -> Self {
        BoostingParams {
            n_estimators: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_child_weight: 1.0,
            gamma: 0.0,
            subsample: 1.0,
            colsample_bytree: 1.0,
            lambda: 1.0,
        }
    }
}

impl BoostingParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| {
            Err(Error::Hyperparameter {
                learner: "gradient_boosting",
                message,
            })
        };
        if self.n_estimators == 0 {
            return bad("no estimators: n_estimators must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!(
                "learning_rate {} outside (0, 1]",
                self.learning_rate
            ));
        }
        if self.max_depth == 0 {
            return bad("max_depth must be >= 1".into());
        }
        for (name, v) in [
            ("subsample", self.subsample),
            ("colsample_bytree", self.colsample_bytree),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} {v} outside (0, 1]"));
            }
        }
        if self.min_child_weight < 0.0 || self.gamma < 0.0 || self.lambda < 0.0 {
            return bad("min_child_weight, gamma and lambda must be >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    base_margin: f64,
    trees: Vec<Tree>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl BoostedTrees {
    pub fn fit(params: &BoostingParams, ds: &Dataset, seed: u64) -> Result<Self> {
        Self::fit_traced(params, ds, seed, |_| {})
    }

    /// Fits and calls `on_tree` with the training margins after every tree.
    pub(crate) fn fit_traced(
        params: &BoostingParams,
        ds: &Dataset,
        seed: u64,
        mut on_tree: impl FnMut(&[f64]),
    ) -> Result<Self> {
        params.validate()?;
        let n = ds.len();
        let d = ds.n_features();
        let prior = ds.class_counts()[1] as f64 / n as f64;
        let prior = prior.clamp(1e-6, 1.0 - 1e-6);
        let base_margin = (prior / (1.0 - prior)).ln();

        let data = ColumnData::new(ds);
        let criterion = SecondOrder {
            lambda: params.lambda,
            gamma: params.gamma,
            min_child_weight: params.min_child_weight,
            learning_rate: params.learning_rate,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_rows = ((params.subsample * n as f64).round() as usize).clamp(1, n);
        let n_cols = ((params.colsample_bytree * d as f64).round() as usize).clamp(1, d.max(1));

        let mut margin = vec![base_margin; n];
        let mut stats = vec![GradStats::default(); n];
        let mut trees = Vec::with_capacity(params.n_estimators);
        let mut in_sample = vec![n_rows == n; n];
        for _ in 0..params.n_estimators {
            for (i, s) in stats.iter_mut().enumerate() {
                let p = sigmoid(margin[i]);
                *s = GradStats {
                    grad: p - ds.labels()[i] as f64,
                    hess: (p * (1.0 - p)).max(1e-16),
                };
            }
            if n_rows < n {
                in_sample.iter_mut().for_each(|b| *b = false);
                for i in sample(&mut rng, n, n_rows).into_iter() {
                    in_sample[i] = true;
                }
            }
            let mut cols: Vec<usize> = if n_cols < d {
                sample(&mut rng, d, n_cols).into_vec()
            } else {
                (0..d).collect()
            };
            cols.sort_unstable();
            let tree = grow(
                &data,
                &stats,
                &in_sample,
                &criterion,
                &GrowParams {
                    max_depth: Some(params.max_depth),
                    tree_features: Some(&cols),
                    features_per_node: None,
                },
                &mut rng,
            );
            for (i, m) in margin.iter_mut().enumerate() {
                *m += tree.predict_column_row(&data, i);
            }
            on_tree(&margin);
            trees.push(tree);
        }
        Ok(BoostedTrees { base_margin, trees })
    }

    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_margin + self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn predict_positive(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

#[cfg(test)]
fn log_loss_from_margins(margins: &[f64], labels: &[u8]) -> f64 {
    margins
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            // log(1 + e^z) - y z, computed stably
            let softplus = if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            softplus - y as f64 * z
        })
        .sum::<f64>()
        / margins.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor() -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        // Unequal cell counts so the first split has non-zero gain.
        for (a, b, count) in [(0u8, 0u8, 12), (0, 1, 8), (1, 0, 10), (1, 1, 10)] {
            for _ in 0..count {
                rows.push(vec![a as f64, b as f64]);
                labels.push(a ^ b);
            }
        }
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn zero_estimators_is_rejected() {
        let p = BoostingParams {
            n_estimators: 0,
            ..Default::default()
        };
        let err = BoostedTrees::fit(&p, &xor(), 0).unwrap_err();
        assert!(err.to_string().contains("no estimators"));
    }

    #[test]
    fn stump_cannot_fit_xor() {
        let ds = xor();
        let p = BoostingParams {
            n_estimators: 1,
            max_depth: 1,
            learning_rate: 1.0,
            ..Default::default()
        };
        let m = BoostedTrees::fit(&p, &ds, 0).unwrap();
        let correct = (0..ds.len())
            .filter(|&i| u8::from(m.predict_positive(ds.row(i)) >= 0.5) == ds.labels()[i])
            .count();
        assert!(correct as f64 / ds.len() as f64 <= 0.75);
    }

    #[test]
    fn depth_two_fits_xor() {
        let ds = xor();
        let p = BoostingParams {
            n_estimators: 20,
            max_depth: 2,
            learning_rate: 0.5,
            min_child_weight: 0.0,
            ..Default::default()
        };
        let m = BoostedTrees::fit(&p, &ds, 0).unwrap();
        for i in 0..ds.len() {
            assert_eq!(
                u8::from(m.predict_positive(ds.row(i)) >= 0.5),
                ds.labels()[i]
            );
        }
    }

    #[test]
    fn training_loss_never_increases_without_subsampling() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()])
            .collect();
        let labels = (0..60)
            .map(|i| u8::from((i as f64 * 0.37).sin() + 0.3 * ((i % 5) as f64 - 2.0) > 0.0))
            .collect();
        let ds = Dataset::from_rows(&rows, labels).unwrap();
        let p = BoostingParams {
            n_estimators: 50,
            learning_rate: 0.3,
            max_depth: 3,
            ..Default::default()
        };
        let mut losses = Vec::new();
        BoostedTrees::fit_traced(&p, &ds, 1, |m| {
            losses.push(log_loss_from_margins(m, ds.labels()))
        })
        .unwrap();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn same_seed_same_trees_with_subsampling() {
        let ds = xor();
        let p = BoostingParams {
            subsample: 0.8,
            colsample_bytree: 0.5,
            n_estimators: 10,
            ..Default::default()
        };
        assert_eq!(
            BoostedTrees::fit(&p, &ds, 3).unwrap(),
            BoostedTrees::fit(&p, &ds, 3).unwrap()
        );
    }
}
