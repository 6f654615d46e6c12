use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

/// Class-ratio trigger below which the main model's training set is balanced.
pub const DEFAULT_TRIGGER_RATIO: f64 = 0.6;

#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Dataset,
    pub validation: Dataset,
    pub seed: u64,
    pub ratio: f64,
}

/// Seeded stratified train/validation split. Row order is preserved inside each part.
pub fn stratified_split(ds: &Dataset, ratio: f64, seed: u64) -> Result<SplitPair> {
    if !(ratio > 0.0) {
        return Err(Error::Config(format!("split ratio {ratio}: empty train")));
    }
    if ratio >= 1.0 {
        return Err(Error::Config(format!(
            "split ratio {ratio}: empty validation"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for (class, mut members) in ds.indices_by_class().into_iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::Data(format!(
                "class {class} has {} instance(s); stratified split needs at least 2",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n = members.len();
        let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
        train_idx.extend_from_slice(&members[..n_train]);
        val_idx.extend_from_slice(&members[n_train..]);
    }
    train_idx.sort_unstable();
    val_idx.sort_unstable();
    Ok(SplitPair {
        train: ds.select(&train_idx),
        validation: ds.select(&val_idx),
        seed,
        ratio,
    })
}

/// Seeded stratified k-fold assignment over `labels`; returns the held-out
/// row indices of each fold, each sorted ascending.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let mut by_class = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y as usize].push(i);
    }
    for (class, members) in by_class.iter().enumerate() {
        if members.len() < k {
            return Err(Error::Data(format!(
                "class {class} has {} instance(s), fewer than {k} folds",
                members.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0usize;
    for members in by_class.iter_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Randomly drops majority-class rows until both classes have `min(n_0, n_1)` rows.
pub fn undersample(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let keep = undersample_indices(ds.labels(), seed)?;
    if keep.len() == ds.len() {
        return Ok(ds.clone());
    }
    Ok(ds.select(&keep))
}

/// Row indices kept by [`undersample`], ascending.
pub(crate) fn undersample_indices(labels: &[u8], seed: u64) -> Result<Vec<usize>> {
    let mut by_class = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y as usize].push(i);
    }
    let [c0, c1] = by_class;
    if c0.is_empty() || c1.is_empty() {
        return Err(Error::SingleClass(
            "undersampling needs both classes".into(),
        ));
    }
    if c0.len() == c1.len() {
        return Ok((0..labels.len()).collect());
    }
    let (mut major, minor) = if c0.len() > c1.len() {
        (c0, c1)
    } else {
        (c1, c0)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    major.shuffle(&mut rng);
    major.truncate(minor.len());
    let mut keep = minor;
    keep.extend(major);
    keep.sort_unstable();
    Ok(keep)
}

/// Undersamples only when `n_min / n_max <= trigger_ratio`.
pub fn maybe_undersample(ds: &Dataset, trigger_ratio: f64, seed: u64) -> Result<Dataset> {
    let [n0, n1] = ds.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClass(
            "undersampling needs both classes".into(),
        ));
    }
    let ratio = n0.min(n1) as f64 / n0.max(n1) as f64;
    if ratio <= trigger_ratio {
        undersample(ds, seed)
    } else {
        Ok(ds.clone())
    }
}
