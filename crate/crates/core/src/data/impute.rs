use super::Dataset;
use crate::error::{Error, Result};

fn distance(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut shared = 0usize;
    for (x, y) in a.iter().zip(b) {
        if !x.is_nan() && !y.is_nan() {
            sum += (x - y) * (x - y);
            shared += 1;
        }
    }
    if shared == 0 {
        f64::INFINITY
    } else {
        sum.sqrt()
    }
}

/// k-nearest-neighbour imputation using the dataset's own rows as donors.
///
/// Each missing entry becomes the mean of that column over the `k` nearest
/// rows that observe it. Distance is Euclidean over the columns present in
/// both rows; rows sharing no observed column are never neighbours.
pub fn impute_knn(ds: &Dataset, k: usize) -> Result<Dataset> {
    impute_inner(ds, ds, k, true)
}

/// Same as [`impute_knn`] but draws neighbours from `donors` (e.g. the
/// training set when imputing a test set).
pub fn impute_knn_from(target: &Dataset, donors: &Dataset, k: usize) -> Result<Dataset> {
    if target.n_features() != donors.n_features() {
        return Err(Error::DimensionMismatch {
            expected: donors.n_features(),
            got: target.n_features(),
        });
    }
    impute_inner(target, donors, k, false)
}

fn impute_inner(target: &Dataset, donors: &Dataset, k: usize, same: bool) -> Result<Dataset> {
    if !target.has_missing() {
        return Ok(target.clone());
    }
    if k == 0 {
        return Err(Error::Config("imputation needs k >= 1".into()));
    }
    let n_donors = donors.len();
    let max_k = if same {
        n_donors.saturating_sub(1)
    } else {
        n_donors
    };
    let k = if k > max_k {
        log::warn!("k = {k} exceeds available neighbours; clamping to {max_k}");
        max_k.max(1)
    } else {
        k
    };

    let d = target.n_features();
    let mut filled = target.features().clone();
    for j in 0..d {
        let col_donors: Vec<usize> = (0..n_donors)
            .filter(|&r| !donors.features()[[r, j]].is_nan())
            .collect();
        let needs: Vec<usize> = (0..target.len())
            .filter(|&i| target.features()[[i, j]].is_nan())
            .collect();
        if needs.is_empty() {
            continue;
        }
        if col_donors.is_empty() {
            return Err(Error::ColumnUnimputable(target.feature_names()[j].clone()));
        }
        for i in needs {
            let row = target.row(i);
            let mut cand: Vec<(f64, usize)> = col_donors
                .iter()
                .filter(|&&r| !(same && r == i))
                .map(|&r| (distance(row, donors.row(r)), r))
                .filter(|(dist, _)| dist.is_finite())
                .collect();
            let value = if cand.is_empty() {
                log::warn!(
                    "instance `{}` shares no observed column with any donor; using column mean for `{}`",
                    target.ids()[i],
                    target.feature_names()[j]
                );
                col_donors
                    .iter()
                    .map(|&r| donors.features()[[r, j]])
                    .sum::<f64>()
                    / col_donors.len() as f64
            } else {
                cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let take = k.min(cand.len());
                cand[..take]
                    .iter()
                    .map(|&(_, r)| donors.features()[[r, j]])
                    .sum::<f64>()
                    / take as f64
            };
            filled[[i, j]] = value;
        }
    }
    Ok(target.with_new_features(filled))
}
