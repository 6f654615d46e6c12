//! L2-regularised logistic regression fitted by damped Newton iterations.
//!
//! Weight vectors are laid out as `[w_1, …, w_d, bias]`. The objective is the
//! mean log-loss plus `l2/2 · ‖w‖²`; the bias is not penalised.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::boosting::sigmoid;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::spd_solve;

pub const DEFAULT_L2: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_GRAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Z-score features with training statistics before fitting.
    pub standardize: bool,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            l2: DEFAULT_L2,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_GRAD_TOL,
            standardize: true,
        }
    }
}

impl LogisticParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2 >= 0.0) || self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::Hyperparameter {
                learner: "logistic",
                message: "need l2 >= 0, max_iter >= 1, tol > 0".into(),
            });
        }
        Ok(())
    }
}

fn check_dims(weights: &Array1<f64>, d: usize) -> Result<()> {
    if weights.len() != d + 1 {
        return Err(Error::DimensionMismatch {
            expected: d + 1,
            got: weights.len(),
        });
    }
    Ok(())
}

fn margin(weights: &Array1<f64>, row: &[f64]) -> f64 {
    let d = row.len();
    row.iter()
        .zip(weights.iter())
        .map(|(x, w)| x * w)
        .sum::<f64>()
        + weights[d]
}

/// `log(1 + e^z) - y z` without overflow.
fn point_loss(z: f64, y: f64) -> f64 {
    let softplus = if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    };
    softplus - y * z
}

fn penalty(weights: &Array1<f64>, l2: f64) -> f64 {
    let d = weights.len() - 1;
    0.5 * l2 * weights.iter().take(d).map(|w| w * w).sum::<f64>()
}

/// Mean log-loss over `data` plus the L2 penalty.
pub fn logistic_loss(weights: &Array1<f64>, data: &Dataset, l2: f64) -> Result<f64> {
    check_dims(weights, data.n_features())?;
    Ok(mean_loss(weights, data) + penalty(weights, l2))
}

/// Mean unregularised log-loss.
pub fn mean_loss(weights: &Array1<f64>, data: &Dataset) -> f64 {
    (0..data.len())
        .map(|i| point_loss(margin(weights, data.row(i)), data.labels()[i] as f64))
        .sum::<f64>()
        / data.len() as f64
}

/// Gradient of the unregularised loss of a single instance.
pub fn instance_gradient(weights: &Array1<f64>, row: &[f64], label: u8) -> Array1<f64> {
    let r = sigmoid(margin(weights, row)) - label as f64;
    let mut g = Array1::<f64>::zeros(row.len() + 1);
    for (gj, x) in g.iter_mut().zip(row) {
        *gj = r * x;
    }
    g[row.len()] = r;
    g
}

/// Gradient of [`logistic_loss`].
pub fn logistic_gradient(weights: &Array1<f64>, data: &Dataset, l2: f64) -> Result<Array1<f64>> {
    check_dims(weights, data.n_features())?;
    let d = data.n_features();
    let mut g = Array1::<f64>::zeros(d + 1);
    for i in 0..data.len() {
        let row = data.row(i);
        let r = sigmoid(margin(weights, row)) - data.labels()[i] as f64;
        for j in 0..d {
            g[j] += r * row[j];
        }
        g[d] += r;
    }
    g /= data.len() as f64;
    for j in 0..d {
        g[j] += l2 * weights[j];
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logistic gradient".into()));
    }
    Ok(g)
}

/// Hessian of [`logistic_loss`]: `(1/n) Σ p(1-p) x̃ x̃ᵀ + l2 · diag(1,…,1,0)`.
pub fn logistic_hessian(weights: &Array1<f64>, data: &Dataset, l2: f64) -> Result<Array2<f64>> {
    check_dims(weights, data.n_features())?;
    let d = data.n_features();
    let mut h = Array2::<f64>::zeros((d + 1, d + 1));
    let mut xt = vec![0.0; d + 1];
    for i in 0..data.len() {
        let row = data.row(i);
        let p = sigmoid(margin(weights, row));
        let s = p * (1.0 - p);
        xt[..d].copy_from_slice(row);
        xt[d] = 1.0;
        for a in 0..=d {
            let sa = s * xt[a];
            for b in a..=d {
                h[[a, b]] += sa * xt[b];
            }
        }
    }
    let n = data.len() as f64;
    for a in 0..=d {
        for b in a..=d {
            h[[a, b]] /= n;
            h[[b, a]] = h[[a, b]];
        }
    }
    for j in 0..d {
        h[[j, j]] += l2;
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logistic hessian".into()));
    }
    Ok(h)
}

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub weights: Array1<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
}

/// Newton's method with backtracking from zero weights.
pub fn fit_logistic_weights(
    data: &Dataset,
    l2: f64,
    max_iter: usize,
    tol: f64,
) -> Result<LogisticFit> {
    if !data.has_both_classes() {
        return Err(Error::SingleClass("logistic regression".into()));
    }
    data.ensure_finite()?;
    let d = data.n_features();
    let mut w = Array1::<f64>::zeros(d + 1);
    let mut loss = logistic_loss(&w, data, l2)?;
    let mut grad_norm = f64::INFINITY;
    for it in 0..max_iter {
        let g = logistic_gradient(&w, data, l2)?;
        grad_norm = g.dot(&g).sqrt();
        if grad_norm < tol {
            return Ok(LogisticFit {
                weights: w,
                iterations: it,
                converged: true,
                grad_norm,
            });
        }
        let h = logistic_hessian(&w, data, l2)?;
        // A tiny ridge keeps the bias block solvable when l2 = 0 and data separate.
        let step = match spd_solve(&h, &g) {
            Ok(s) => s,
            Err(_) => {
                let mut hr = h.clone();
                for j in 0..=d {
                    hr[[j, j]] += 1e-8;
                }
                spd_solve(&hr, &g)?
            }
        };
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &w - &(t * &step);
            let cl = logistic_loss(&cand, data, l2)?;
            if cl <= loss - 1e-4 * t * slope {
                accepted = Some((cand, cl));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, cl)) => {
                w = cand;
                loss = cl;
            }
            None => break,
        }
    }
    let g = logistic_gradient(&w, data, l2)?;
    grad_norm = grad_norm.min(g.dot(&g).sqrt());
    Ok(LogisticFit {
        converged: grad_norm < tol,
        weights: w,
        iterations: max_iter,
        grad_norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    mean: Vec<f64>,
    scale: Vec<f64>,
    weights: Vec<f64>,
}

/// Per-column mean and standard deviation (1 for constant columns).
pub(crate) fn column_moments(ds: &Dataset) -> (Vec<f64>, Vec<f64>) {
    let n = ds.len() as f64;
    let d = ds.n_features();
    let mut mean = vec![0.0; d];
    let mut var = vec![0.0; d];
    for i in 0..ds.len() {
        for (j, v) in ds.row(i).iter().enumerate() {
            mean[j] += v / n;
        }
    }
    for i in 0..ds.len() {
        for (j, v) in ds.row(i).iter().enumerate() {
            var[j] += (v - mean[j]).powi(2) / n;
        }
    }
    let scale = var
        .into_iter()
        .map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 })
        .collect();
    (mean, scale)
}

pub(crate) fn standardize(ds: &Dataset, mean: &[f64], scale: &[f64]) -> Dataset {
    let mut f = ds.features().clone();
    for mut row in f.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - mean[j]) / scale[j];
        }
    }
    ds.with_new_features(f)
}

impl LogisticModel {
    pub fn fit(params: &LogisticParams, ds: &Dataset) -> Result<Self> {
        params.validate()?;
        let d = ds.n_features();
        let (mean, scale) = if params.standardize {
            column_moments(ds)
        } else {
            (vec![0.0; d], vec![1.0; d])
        };
        let z = standardize(ds, &mean, &scale);
        let fit = fit_logistic_weights(&z, params.l2, params.max_iter, params.tol)?;
        if !fit.converged {
            log::debug!(
                "logistic fit stopped with gradient norm {:e}",
                fit.grad_norm
            );
        }
        Ok(LogisticModel {
            mean,
            scale,
            weights: fit.weights.to_vec(),
        })
    }

    pub fn predict_positive(&self, row: &[f64]) -> f64 {
        let d = self.mean.len();
        let z: f64 = row
            .iter()
            .enumerate()
            .map(|(j, x)| (x - self.mean[j]) / self.scale[j] * self.weights[j])
            .sum::<f64>()
            + self.weights[d];
        sigmoid(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn small() -> Dataset {
        Dataset::from_rows(
            &[
                vec![1.0, 0.5],
                vec![-1.0, -0.5],
                vec![0.3, -1.2],
                vec![-0.3, 1.2],
                vec![2.0, 0.1],
                vec![-2.0, -0.1],
            ],
            vec![1, 0, 1, 0, 0, 1],
        )
        .unwrap()
    }

    #[test]
    fn symmetric_balanced_data_zero_bias_gradient() {
        let ds = Dataset::from_rows(
            &[vec![1.0], vec![-1.0], vec![1.0], vec![-1.0]],
            vec![1, 0, 0, 1],
        )
        .unwrap();
        let g = logistic_gradient(&Array1::zeros(2), &ds, 0.1).unwrap();
        assert!(g[1].abs() < 1e-15);
    }

    #[test]
    fn weight_length_is_checked() {
        assert!(logistic_gradient(&array![0.0, 0.0], &small(), 0.0).is_err());
    }

    #[test]
    fn hessian_is_symmetric_positive_definite_with_l2() {
        let w = array![0.3, -0.2, 0.1];
        let h = logistic_hessian(&w, &small(), 1e-3).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(h[[a, b]], h[[b, a]]);
            }
        }
        assert!(crate::linalg::cholesky(&h).is_ok());
    }

    #[test]
    fn separable_blobs_are_fit_perfectly() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..30 {
            let t = i as f64 * 0.21;
            rows.push(vec![2.0 + t.sin(), 2.0 + t.cos()]);
            labels.push(1);
            rows.push(vec![-2.0 + t.cos(), -2.0 + t.sin()]);
            labels.push(0);
        }
        let ds = Dataset::from_rows(&rows, labels).unwrap();
        let m = LogisticModel::fit(&LogisticParams::default(), &ds).unwrap();
        for i in 0..ds.len() {
            assert_eq!(
                u8::from(m.predict_positive(ds.row(i)) >= 0.5),
                ds.labels()[i]
            );
        }
    }

    #[test]
    fn newton_reaches_stationary_point() {
        let fit = fit_logistic_weights(&small(), 1e-2, 100, 1e-10).unwrap();
        assert!(fit.converged);
        let g = logistic_gradient(&fit.weights, &small(), 1e-2).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-9));
    }
}
