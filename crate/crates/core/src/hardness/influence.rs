use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ih::training_rows;
use super::{CvProtocol, HardnessMethod, HardnessScores, Provenance};
use crate::data::{stratified_folds, Dataset};
use crate::error::{Error, Result, ResultExt};
use crate::learners::logistic::{column_moments, standardize, DEFAULT_GRAD_TOL, DEFAULT_MAX_ITER};
use crate::learners::{fit_logistic_weights, instance_gradient, logistic_hessian, mean_loss};
use crate::linalg::spd_solve;
use crate::seeds::{derive_seed, Stream};
use ndarray::Array1;

pub const DEFAULT_INFLUENCE_L2: f64 = 1e-4;

/// `∇L̄_valᵀ H⁻¹ ∇L(z_i)` for every training row `z_i`, where `L̄_val` is the
/// mean validation loss and `H` the Hessian of the regularised training loss
/// at `weights`. Approximately `n` times the change in validation loss when
/// `z_i` is left out, so helpful points score high.
pub fn influence_values(
    weights: &Array1<f64>,
    train: &Dataset,
    validation: &Dataset,
    l2: f64,
) -> Result<Vec<f64>> {
    let h = logistic_hessian(weights, train, l2)?;
    let d = train.n_features();
    let mut g_val = Array1::<f64>::zeros(d + 1);
    for i in 0..validation.len() {
        g_val += &instance_gradient(weights, validation.row(i), validation.labels()[i]);
    }
    g_val /= validation.len() as f64;
    let v = spd_solve(&h, &g_val)?;
    Ok((0..train.len())
        .map(|i| v.dot(&instance_gradient(weights, train.row(i), train.labels()[i])))
        .collect())
}

fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

struct Run {
    train: Vec<usize>,
    validation: Vec<usize>,
    /// Rows whose score is kept; all of `train` outside the coverage pass.
    record: Vec<usize>,
    label: String,
}

/// Harm scores normalised to [0, 1] within the run, for the recorded rows.
fn run_scores(data: &Dataset, run: &Run, l2: f64) -> Result<Vec<(usize, f64)>> {
    let train = data.select(&run.train);
    let (mean, scale) = column_moments(&train);
    let train = standardize(&train, &mean, &scale);
    let validation = standardize(&data.select(&run.validation), &mean, &scale);
    let fit = fit_logistic_weights(&train, l2, DEFAULT_MAX_ITER, DEFAULT_GRAD_TOL)?;
    if !fit.converged {
        return Err(Error::NonConvergent {
            context: format!(
                "{}: gradient norm {:e} after {} iterations",
                run.label, fit.grad_norm, fit.iterations
            ),
        });
    }
    let values = influence_values(&fit.weights, &train, &validation, l2)?;
    let val_loss = mean_loss(&fit.weights, &validation);
    let harm: Vec<f64> = values.iter().map(|v| -v * val_loss).collect();
    let normalized = min_max(&harm);
    let pos: std::collections::HashMap<usize, usize> =
        run.train.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    Ok(run
        .record
        .iter()
        .map(|i| (*i, normalized[pos[i]]))
        .collect())
}

/// Coverage rounds for rows that no balanced training set contained. Each such
/// row joins one extra balanced round per repeat, as training data for the fold
/// after its own.
fn coverage_runs(
    data: &Dataset,
    folds: &[Vec<Vec<usize>>],
    covered: &[bool],
    protocol: &CvProtocol,
) -> Vec<Run> {
    let k = protocol.folds;
    let mut runs = Vec::new();
    for (r, repeat_folds) in folds.iter().enumerate() {
        let mut fold_of = vec![0usize; data.len()];
        for (f, held) in repeat_folds.iter().enumerate() {
            for &i in held {
                fold_of[i] = f;
            }
        }
        for g in 0..k {
            let mut pool = [Vec::new(), Vec::new()];
            let mut pending = [Vec::new(), Vec::new()];
            for i in 0..data.len() {
                if fold_of[i] == g {
                    continue;
                }
                let c = data.labels()[i] as usize;
                if !covered[i] && (fold_of[i] + 1) % k == g {
                    pending[c].push(i);
                } else {
                    pool[c].push(i);
                }
            }
            if pending[0].is_empty() && pending[1].is_empty() {
                continue;
            }
            let m = (pool[0].len() + pending[0].len()).min(pool[1].len() + pending[1].len());
            if m == 0 {
                continue;
            }
            let n_rounds = pending
                .iter()
                .map(|p| p.len().div_ceil(m))
                .max()
                .unwrap_or(0);
            let seed = derive_seed(protocol.seeds[r], Stream::Coverage, g as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for t in 0..n_rounds {
                let mut train = Vec::new();
                let mut record = Vec::new();
                for c in 0..2 {
                    let chunk: Vec<usize> =
                        pending[c].iter().skip(t * m).take(m).copied().collect();
                    let mut fill: Vec<usize> = pool[c]
                        .iter()
                        .chain(pending[c].iter())
                        .copied()
                        .filter(|i| !chunk.contains(i))
                        .collect();
                    fill.shuffle(&mut rng);
                    fill.truncate(m - chunk.len());
                    record.extend_from_slice(&chunk);
                    train.extend(chunk);
                    train.extend(fill);
                }
                train.sort_unstable();
                record.sort_unstable();
                runs.push(Run {
                    train,
                    validation: repeat_folds[g].clone(),
                    record,
                    label: format!(
                        "coverage repeat {r} (seed {}) fold {g} round {t}",
                        protocol.seeds[r]
                    ),
                });
            }
        }
    }
    runs
}

fn accumulate(
    data: &Dataset,
    runs: &[Run],
    l2: f64,
    sum: &mut [f64],
    count: &mut [usize],
) -> Result<()> {
    let results: Vec<Result<Vec<(usize, f64)>>> = runs
        .par_iter()
        .map(|run| run_scores(data, run, l2))
        .collect();
    for res in results {
        for (i, s) in res? {
            sum[i] += s;
            count[i] += 1;
        }
    }
    Ok(())
}

/// Influence-based hardness averaged over repeated cross-validation runs.
pub fn compute_influence(data: &Dataset, protocol: &CvProtocol, l2: f64) -> Result<HardnessScores> {
    protocol.validate()?;
    if !(l2 > 0.0) {
        return Err(Error::Config(format!("influence needs l2 > 0, got {l2}")));
    }
    data.ensure_finite()?;

    let mut folds = Vec::with_capacity(protocol.repeats);
    let mut runs = Vec::new();
    for (r, &seed) in protocol.seeds.iter().enumerate() {
        let f_r = stratified_folds(data.labels(), protocol.folds, seed)
            .context_with(|| format!("repeat {r}"))?;
        for (f, held) in f_r.iter().enumerate() {
            let train = training_rows(
                data,
                held,
                protocol.balance_within_fold,
                derive_seed(seed, Stream::Undersample, f as u64),
            )?;
            runs.push(Run {
                record: train.clone(),
                train,
                validation: held.clone(),
                label: format!("repeat {r} (seed {seed}) fold {f}"),
            });
        }
        folds.push(f_r);
    }

    let mut sum = vec![0.0; data.len()];
    let mut count = vec![0usize; data.len()];
    accumulate(data, &runs, l2, &mut sum, &mut count)?;

    let covered: Vec<bool> = count.iter().map(|&c| c > 0).collect();
    let extra = coverage_runs(data, &folds, &covered, protocol);
    accumulate(data, &extra, l2, &mut sum, &mut count)?;
    if let Some(i) = count.iter().position(|&c| c == 0) {
        return Err(Error::Data(format!(
            "instance `{}` received no influence score",
            data.ids()[i]
        )));
    }

    let rows = (0..data.len()).map(|i| {
        (
            data.ids()[i].clone(),
            (sum[i] / count[i] as f64).clamp(0.0, 1.0),
            count[i],
        )
    });
    Ok(HardnessScores::from_rows(
        HardnessMethod::Influence,
        rows,
        Some(Provenance {
            method: HardnessMethod::Influence,
            protocol: protocol.clone(),
            pool: None,
            l2: Some(l2),
            coverage_rounds: extra.len(),
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn imbalanced() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let t = i as f64;
                vec![
                    (t * 0.37).sin() + if i < 8 { 1.2 } else { -0.4 },
                    (t * 0.91).cos(),
                ]
            })
            .collect();
        let labels = (0..60).map(|i| u8::from(i < 8)).collect();
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn every_instance_is_scored() {
        let ds = imbalanced();
        let p = CvProtocol {
            repeats: 1,
            seeds: vec![4],
            ..CvProtocol::default()
        };
        let s = compute_influence(&ds, &p, 1e-2).unwrap();
        assert_eq!(s.len(), ds.len());
        assert!(s.provenance().unwrap().coverage_rounds > 0);
        for id in ds.ids() {
            assert!((0.0..=1.0).contains(&s.get(id).unwrap()));
            assert!(s.n_rounds(id).unwrap() >= 1);
        }
    }

    #[test]
    fn min_max_degenerate_is_zero() {
        assert_eq!(min_max(&[2.0, 2.0]), vec![0.0, 0.0]);
        assert_eq!(min_max(&[1.0, 3.0, 2.0]), vec![0.0, 1.0, 0.5]);
    }

    #[test]
    fn non_positive_l2_rejected() {
        assert!(compute_influence(&imbalanced(), &CvProtocol::default(), 0.0).is_err());
    }
}
