use rayon::prelude::*;

use super::{CvProtocol, HardnessMethod, HardnessScores, Provenance};
use crate::data::{stratified_folds, undersample_indices, Dataset};
use crate::error::{Error, Result, ResultExt};
use crate::learners::{fit, LearnerSpec};
use crate::seeds::{derive_seed, Stream};
use crate::selective::{fit_sigmoid, out_of_fold_raw, DEFAULT_CALIBRATION_FOLDS};

/// `1 - mean(p)` over the calibrated probabilities of the true label.
pub fn instance_hardness(p_true: &[f64]) -> f64 {
    1.0 - p_true.iter().sum::<f64>() / p_true.len() as f64
}

/// Training rows for one held-out fold, balanced when the protocol asks for it.
pub(super) fn training_rows(
    data: &Dataset,
    held_out: &[usize],
    balance: bool,
    seed: u64,
) -> Result<Vec<usize>> {
    let mut in_fold = vec![false; data.len()];
    for &i in held_out {
        in_fold[i] = true;
    }
    let rows: Vec<usize> = (0..data.len()).filter(|&i| !in_fold[i]).collect();
    if !balance {
        return Ok(rows);
    }
    let labels: Vec<u8> = rows.iter().map(|&i| data.labels()[i]).collect();
    Ok(undersample_indices(&labels, seed)?
        .into_iter()
        .map(|k| rows[k])
        .collect())
}

struct Round {
    repeat: usize,
    fold: usize,
    learner: usize,
}

fn round_probabilities(
    data: &Dataset,
    held_out: &[usize],
    train_rows: &[usize],
    spec: &LearnerSpec,
) -> Result<Vec<(usize, f64)>> {
    let train = data.select(train_rows);
    let model = fit(spec, &train)?;
    let [n0, n1] = train.class_counts();
    let inner = DEFAULT_CALIBRATION_FOLDS.min(n0.min(n1));
    let calibration = if inner >= 2 {
        let raw = out_of_fold_raw(spec, &train, inner, spec.seed)?;
        Some(fit_sigmoid(&raw, train.labels())?)
    } else {
        log::warn!(
            "instance hardness: too few rows per class to calibrate {}; using raw probabilities",
            spec.name()
        );
        None
    };
    held_out
        .iter()
        .map(|&i| {
            let raw = model.predict_positive(data.row(i))?;
            let p = calibration.map_or(raw, |c| c.apply(raw));
            let p_true = if data.labels()[i] == 1 { p } else { 1.0 - p };
            Ok((i, p_true))
        })
        .collect()
}

/// Instance hardness by repeated stratified cross-validation over `pool`.
///
/// Each pool member is trained on the (balanced) training folds, calibrated on
/// its own out-of-fold training predictions, and scores the held-out fold.
pub fn compute_ih(
    data: &Dataset,
    pool: &[LearnerSpec],
    protocol: &CvProtocol,
) -> Result<HardnessScores> {
    protocol.validate()?;
    if pool.is_empty() {
        return Err(Error::Config(
            "instance hardness needs a non-empty learner pool".into(),
        ));
    }
    if pool.len() < 2 {
        log::warn!("instance hardness with a single learner has no consensus");
    }
    data.ensure_finite()?;
    for spec in pool {
        spec.kind.validate()?;
    }

    let mut folds = Vec::with_capacity(protocol.repeats);
    for (r, &seed) in protocol.seeds.iter().enumerate() {
        folds.push(
            stratified_folds(data.labels(), protocol.folds, seed)
                .context_with(|| format!("repeat {r}"))?,
        );
    }
    let mut train_rows = Vec::new();
    for (r, &seed) in protocol.seeds.iter().enumerate() {
        let mut per_fold = Vec::new();
        for (f, held) in folds[r].iter().enumerate() {
            per_fold.push(training_rows(
                data,
                held,
                protocol.balance_within_fold,
                derive_seed(seed, Stream::Undersample, f as u64),
            )?);
        }
        train_rows.push(per_fold);
    }

    let rounds: Vec<Round> = (0..protocol.repeats)
        .flat_map(|repeat| {
            (0..protocol.folds).flat_map(move |fold| {
                (0..pool.len()).map(move |learner| Round {
                    repeat,
                    fold,
                    learner,
                })
            })
        })
        .collect();
    let results: Vec<Result<Vec<(usize, f64)>>> = rounds
        .par_iter()
        .map(|rd| {
            let seed = protocol.seeds[rd.repeat];
            let spec = pool[rd.learner].with_seed(derive_seed(
                seed ^ pool[rd.learner].seed,
                Stream::Learner,
                (rd.fold * pool.len() + rd.learner) as u64,
            ));
            round_probabilities(
                data,
                &folds[rd.repeat][rd.fold],
                &train_rows[rd.repeat][rd.fold],
                &spec,
            )
            .context_with(|| {
                format!(
                    "repeat {} (seed {seed}) fold {} learner {}",
                    rd.repeat,
                    rd.fold,
                    spec.name()
                )
            })
        })
        .collect();

    let mut sum = vec![0.0; data.len()];
    let mut count = vec![0usize; data.len()];
    for res in results {
        for (i, p) in res? {
            sum[i] += p;
            count[i] += 1;
        }
    }
    let rows = (0..data.len()).map(|i| {
        let ih = if count[i] > 0 {
            (1.0 - sum[i] / count[i] as f64).clamp(0.0, 1.0)
        } else {
            0.5
        };
        (data.ids()[i].clone(), ih, count[i] / pool.len())
    });
    Ok(HardnessScores::from_rows(
        HardnessMethod::InstanceHardness,
        rows,
        Some(Provenance {
            method: HardnessMethod::InstanceHardness,
            protocol: protocol.clone(),
            pool: Some(pool.to_vec()),
            l2: None,
            coverage_rounds: 0,
        }),
    ))
}
