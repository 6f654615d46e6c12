use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NaiveBayesParams {
    /// Added to every variance, as a fraction of the largest feature variance.
    pub var_smoothing: f64,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        NaiveBayesParams {
            var_smoothing: 1e-9,
        }
    }
}

impl NaiveBayesParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.var_smoothing >= 0.0) {
            return Err(Error::Hyperparameter {
                learner: "naive_bayes",
                message: "var_smoothing must be >= 0".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    log_prior: [f64; 2],
    mean: [Vec<f64>; 2],
    var: [Vec<f64>; 2],
}

impl GaussianNb {
    pub fn fit(params: &NaiveBayesParams, ds: &Dataset) -> Result<Self> {
        params.validate()?;
        let d = ds.n_features();
        let n = ds.len() as f64;
        let by_class = ds.indices_by_class();
        let mut mean = [vec![0.0; d], vec![0.0; d]];
        let mut var = [vec![0.0; d], vec![0.0; d]];
        let mut log_prior = [0.0; 2];
        for c in 0..2 {
            let idx = &by_class[c];
            let m = idx.len() as f64;
            log_prior[c] = (m / n).ln();
            for &i in idx {
                for (j, v) in ds.row(i).iter().enumerate() {
                    mean[c][j] += v / m;
                }
            }
            for &i in idx {
                for (j, v) in ds.row(i).iter().enumerate() {
                    var[c][j] += (v - mean[c][j]).powi(2) / m;
                }
            }
        }
        // Smoothing uses the variance over all rows, as is conventional.
        let mut max_var: f64 = 0.0;
        for j in 0..d {
            let mu = (0..ds.len()).map(|i| ds.row(i)[j]).sum::<f64>() / n;
            let v = (0..ds.len())
                .map(|i| (ds.row(i)[j] - mu).powi(2))
                .sum::<f64>()
                / n;
            max_var = max_var.max(v);
        }
        let eps = (params.var_smoothing * max_var).max(1e-12);
        for v in var.iter_mut().flat_map(|v| v.iter_mut()) {
            *v += eps;
        }
        Ok(GaussianNb {
            log_prior,
            mean,
            var,
        })
    }

    fn joint_log_likelihood(&self, row: &[f64], c: usize) -> f64 {
        let mut ll = self.log_prior[c];
        for (j, x) in row.iter().enumerate() {
            let v = self.var[c][j];
            ll -= 0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - self.mean[c][j]).powi(2) / v);
        }
        ll
    }

    pub fn predict_positive(&self, row: &[f64]) -> f64 {
        let l0 = self.joint_log_likelihood(row, 0);
        let l1 = self.joint_log_likelihood(row, 1);
        super::boosting::sigmoid(l1 - l0)
    }
}
