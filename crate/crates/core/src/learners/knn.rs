use serde::{Deserialize, Serialize};

use super::logistic::column_moments;
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
    pub standardize: bool,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            k: 5,
            standardize: true,
        }
    }
}

impl KnnParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Hyperparameter {
                learner: "knn",
                message: "k must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Unweighted k-nearest-neighbour vote. Distance ties go to the earlier
/// training row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    k: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
    rows: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

impl Knn {
    pub fn fit(params: &KnnParams, ds: &Dataset) -> Result<Self> {
        params.validate()?;
        let d = ds.n_features();
        let (mean, scale) = if params.standardize {
            column_moments(ds)
        } else {
            (vec![0.0; d], vec![1.0; d])
        };
        let rows = (0..ds.len())
            .map(|i| {
                ds.row(i)
                    .iter()
                    .enumerate()
                    .map(|(j, v)| (v - mean[j]) / scale[j])
                    .collect()
            })
            .collect();
        let k = params.k.min(ds.len());
        if k < params.k {
            log::warn!(
                "knn: k = {} exceeds {} training rows, using {k}",
                params.k,
                ds.len()
            );
        }
        Ok(Knn {
            k,
            mean,
            scale,
            rows,
            labels: ds.labels().to_vec(),
        })
    }

    pub fn predict_positive(&self, row: &[f64]) -> f64 {
        let q: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(j, v)| (v - self.mean[j]) / self.scale[j])
            .collect();
        let mut dist: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                (
                    r.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>(),
                    i,
                )
            })
            .collect();
        let k = self.k;
        dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let positives = dist[..k]
            .iter()
            .filter(|&&(_, i)| self.labels[i] == 1)
            .count();
        positives as f64 / k as f64
    }
}
