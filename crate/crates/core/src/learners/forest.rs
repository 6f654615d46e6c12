use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow, ClassStats, ColumnData, Gini, GrowParams, Tree};
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    /// Unlimited when `None`.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == Some(0) || self.min_samples_leaf == 0 {
            return Err(Error::Hyperparameter {
                learner: "tree",
                message: "max_depth and min_samples_leaf must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Bagged CART trees with per-node feature sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features tried per node; `sqrt(d)` when `None`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 50,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| {
            Err(Error::Hyperparameter {
                learner: "random_forest",
                message: m.into(),
            })
        };
        if self.n_trees == 0 {
            return bad("n_trees must be >= 1");
        }
        if self.max_depth == Some(0) || self.min_samples_leaf == 0 || self.max_features == Some(0) {
            return bad("max_depth, min_samples_leaf and max_features must be >= 1");
        }
        Ok(())
    }
}

fn unit_stats(ds: &Dataset) -> Vec<ClassStats> {
    ds.labels()
        .iter()
        .map(|&y| ClassStats {
            count: 1.0,
            weight: 1.0,
            positive: y as f64,
        })
        .collect()
}

pub(crate) fn fit_tree(params: &TreeParams, ds: &Dataset, seed: u64) -> Result<Tree> {
    params.validate()?;
    let data = ColumnData::new(ds);
    Ok(grow(
        &data,
        &unit_stats(ds),
        &vec![true; ds.len()],
        &Gini {
            min_samples_leaf: params.min_samples_leaf,
        },
        &GrowParams {
            max_depth: params.max_depth,
            tree_features: None,
            features_per_node: None,
        },
        &mut ChaCha8Rng::seed_from_u64(seed),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
}

impl Forest {
    pub fn fit(params: &ForestParams, ds: &Dataset, seed: u64) -> Result<Self> {
        params.validate()?;
        let n = ds.len();
        let d = ds.n_features();
        let data = ColumnData::new(ds);
        let per_node = params
            .max_features
            .unwrap_or_else(|| ((d as f64).sqrt().round() as usize).max(1))
            .min(d.max(1));
        let criterion = Gini {
            min_samples_leaf: params.min_samples_leaf,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trees = Vec::with_capacity(params.n_trees);
        let in_sample = vec![true; n];
        for _ in 0..params.n_trees {
            let mut stats = vec![ClassStats::default(); n];
            if params.bootstrap {
                for _ in 0..n {
                    let i = rng.random_range(0..n);
                    stats[i].count += 1.0;
                    stats[i].weight += 1.0;
                    stats[i].positive += ds.labels()[i] as f64;
                }
            } else {
                stats = unit_stats(ds);
            }
            let used: Vec<bool> = stats.iter().map(|s| s.count > 0.0).collect();
            let mask: &[bool] = if params.bootstrap { &used } else { &in_sample };
            trees.push(grow(
                &data,
                &stats,
                mask,
                &criterion,
                &GrowParams {
                    max_depth: params.max_depth,
                    tree_features: None,
                    features_per_node: Some(per_node),
                },
                &mut rng,
            ));
        }
        Ok(Forest { trees })
    }

    pub fn predict_positive(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let c = if i < 20 { -2.0 } else { 2.0 };
                vec![
                    c + ((i * 13 % 7) as f64 - 3.0) * 0.2,
                    ((i * 5 % 11) as f64) * 0.1,
                ]
            })
            .collect();
        let labels = (0..40).map(|i| u8::from(i >= 20)).collect();
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn forest_fits_blobs() {
        let ds = blobs();
        let f = Forest::fit(&ForestParams::default(), &ds, 7).unwrap();
        for i in 0..ds.len() {
            let p = f.predict_positive(ds.row(i));
            assert!((0.0..=1.0).contains(&p));
            assert_eq!(u8::from(p >= 0.5), ds.labels()[i]);
        }
    }

    #[test]
    fn forest_is_deterministic() {
        let ds = blobs();
        let p = ForestParams {
            n_trees: 5,
            ..Default::default()
        };
        assert_eq!(
            Forest::fit(&p, &ds, 1).unwrap(),
            Forest::fit(&p, &ds, 1).unwrap()
        );
    }

    #[test]
    fn zero_trees_rejected() {
        let p = ForestParams {
            n_trees: 0,
            ..Default::default()
        };
        assert!(Forest::fit(&p, &blobs(), 0).is_err());
    }
}
