use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{stratified_folds, Dataset};
use crate::error::{Error, Result};
use crate::learners::boosting::sigmoid;
use crate::learners::{fit, LearnerSpec};

pub const MAX_SLOPE: f64 = 1e4;
const MAX_ITER: usize = 100;
const STEP_TOL: f64 = 1e-8;

/// Sigmoid map `p̂ = σ(a·p + b)` from raw to calibrated positive-class probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    pub a: f64,
    pub b: f64,
    /// `|a|` hit [`MAX_SLOPE`] because the raw scores separate the classes.
    #[serde(default)]
    pub clamped: bool,
    /// All raw scores were identical; `p̂` is the class prior.
    #[serde(default)]
    pub degenerate: bool,
}

impl CalibrationParams {
    pub fn identity() -> Self {
        CalibrationParams {
            a: 1.0,
            b: 0.0,
            clamped: false,
            degenerate: false,
        }
    }

    pub fn apply(&self, raw_p: f64) -> f64 {
        calibrated_proba(self, raw_p)
    }
}

pub fn calibrated_proba(params: &CalibrationParams, raw_p: f64) -> f64 {
    sigmoid(params.a * raw_p + params.b)
}

fn nll(a: f64, b: f64, raw: &[f64], labels: &[u8]) -> f64 {
    raw.iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let z = a * p + b;
            let softplus = if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            softplus - y as f64 * z
        })
        .sum()
}

/// Negative log-likelihood of `labels` under `σ(a·raw + b)`.
pub fn calibration_nll(params: &CalibrationParams, raw: &[f64], labels: &[u8]) -> f64 {
    nll(params.a, params.b, raw, labels)
}

fn fit_intercept(a: f64, raw: &[f64], labels: &[u8], mut b: f64) -> f64 {
    for _ in 0..MAX_ITER {
        let (mut g, mut h) = (0.0, 0.0);
        for (&p, &y) in raw.iter().zip(labels) {
            let s = sigmoid(a * p + b);
            g += s - y as f64;
            h += s * (1.0 - s);
        }
        if h <= 1e-300 {
            break;
        }
        let step = g / h;
        b -= step;
        if step.abs() < STEP_TOL {
            break;
        }
    }
    b
}

/// Newton minimisation of the NLL over `(a, b)`.
pub fn fit_sigmoid(raw: &[f64], labels: &[u8]) -> Result<CalibrationParams> {
    if raw.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: raw.len(),
        });
    }
    if raw.is_empty() {
        return Err(Error::Data(
            "calibration needs at least one prediction".into(),
        ));
    }
    if raw.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite(
            "raw probability passed to calibration".into(),
        ));
    }
    let n = raw.len() as f64;
    let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let prior = ((pos + 0.5) / (n + 1.0)).clamp(1e-12, 1.0 - 1e-12);
    let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 1e-15 {
        log::warn!("calibration: all raw scores equal; using the class prior");
        return Ok(CalibrationParams {
            a: 0.0,
            b: (prior / (1.0 - prior)).ln(),
            clamped: true,
            degenerate: true,
        });
    }

    // Perfect separation drives `a` to infinity; jump straight to the clamp.
    let extreme = |class: u8, f: fn(f64, f64) -> f64, init: f64| {
        raw.iter()
            .zip(labels)
            .filter(|(_, &y)| y == class)
            .map(|(&p, _)| p)
            .fold(init, f)
    };
    let (max0, min0) = (
        extreme(0, f64::max, f64::NEG_INFINITY),
        extreme(0, f64::min, f64::INFINITY),
    );
    let (max1, min1) = (
        extreme(1, f64::max, f64::NEG_INFINITY),
        extreme(1, f64::min, f64::INFINITY),
    );
    if pos > 0.0 && pos < n && (max0 < min1 || max1 < min0) {
        log::warn!("calibration: raw scores separate the classes; clamping |a| to {MAX_SLOPE}");
        let (a, mid) = if max0 < min1 {
            (MAX_SLOPE, 0.5 * (max0 + min1))
        } else {
            (-MAX_SLOPE, 0.5 * (max1 + min0))
        };
        return Ok(CalibrationParams {
            a,
            b: fit_intercept(a, raw, labels, -a * mid),
            clamped: true,
            degenerate: false,
        });
    }

    let (mut a, mut b) = (1.0, 0.0);
    let mut loss = nll(a, b, raw, labels);
    let mut clamped = false;
    for _ in 0..MAX_ITER {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&p, &y) in raw.iter().zip(labels) {
            let s = sigmoid(a * p + b);
            let r = s - y as f64;
            let w = s * (1.0 - s);
            ga += r * p;
            gb += r;
            haa += w * p * p;
            hab += w * p;
            hbb += w;
        }
        let ridge = 1e-12 * (haa + hbb).max(1e-300);
        let (haa, hbb) = (haa + ridge, hbb + ridge);
        let det = haa * hbb - hab * hab;
        if !(det > 0.0) {
            break;
        }
        let da = (hbb * ga - hab * gb) / det;
        let db = (haa * gb - hab * ga) / det;
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..50 {
            let (na, nb) = (a - t * da, b - t * db);
            let nl = nll(na, nb, raw, labels);
            if nl <= loss {
                a = na;
                b = nb;
                loss = nl;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if a.abs() > MAX_SLOPE {
            clamped = true;
            break;
        }
        if !moved || (t * da).abs().max((t * db).abs()) < STEP_TOL {
            break;
        }
    }
    if clamped {
        log::warn!("calibration: raw scores separate the classes; clamping |a| to {MAX_SLOPE}");
        a = a.signum() * MAX_SLOPE;
        b = fit_intercept(a, raw, labels, b);
    }
    Ok(CalibrationParams {
        a,
        b,
        clamped,
        degenerate: false,
    })
}

/// Out-of-fold raw positive-class probabilities from `folds`-fold stratified CV.
pub fn out_of_fold_raw(
    spec: &LearnerSpec,
    train: &Dataset,
    folds: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let assignment = stratified_folds(train.labels(), folds, seed)?;
    let chunks: Vec<Result<Vec<(usize, f64)>>> = assignment
        .par_iter()
        .map(|held| {
            let mut in_fold = vec![false; train.len()];
            for &i in held {
                in_fold[i] = true;
            }
            let rest: Vec<usize> = (0..train.len()).filter(|&i| !in_fold[i]).collect();
            let model = fit(spec, &train.select(&rest))?;
            held.iter()
                .map(|&i| Ok((i, model.predict_positive(train.row(i))?)))
                .collect()
        })
        .collect();
    let mut raw = vec![f64::NAN; train.len()];
    for chunk in chunks {
        for (i, p) in chunk? {
            raw[i] = p;
        }
    }
    Ok(raw)
}

/// Fits `(a, b)` on out-of-fold predictions of `spec` over `train`.
pub fn fit_sigmoid_calibration(
    spec: &LearnerSpec,
    train: &Dataset,
    folds: usize,
) -> Result<CalibrationParams> {
    let raw = out_of_fold_raw(spec, train, folds, spec.seed)?;
    fit_sigmoid(&raw, train.labels())
}
