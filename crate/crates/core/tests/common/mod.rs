#![allow(dead_code)]

use hardreject_core::learners::{
    default_pool, BoostingParams, ForestParams, LearnerKind, LearnerSpec,
};
use hardreject_core::Dataset;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub struct Noisy {
    pub data: Dataset,
    pub flipped: Vec<bool>,
}

/// Balanced 2-Gaussian data with means `separation` apart on the first axis
/// and exactly `round(flip * n)` labels inverted.
pub fn gaussian_pair(n: usize, d: usize, separation: f64, flip: f64, seed: u64) -> Noisy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = u8::from(i % 2 == 1);
        let mut row: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        row[0] += if y == 1 {
            separation / 2.0
        } else {
            -separation / 2.0
        };
        rows.push(row);
        labels.push(y);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut flipped = vec![false; n];
    for &i in order.iter().take((flip * n as f64).round() as usize) {
        flipped[i] = true;
        labels[i] = 1 - labels[i];
    }
    Noisy {
        data: Dataset::from_rows(&rows, labels).unwrap(),
        flipped,
    }
}

/// Random design with labels drawn from a logistic model.
pub fn logistic_problem(n: usize, d: usize, rng: &mut ChaCha8Rng) -> (Dataset, Vec<f64>) {
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
    let bias = rng.random_range(-0.5..0.5);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while rows.len() < n {
        let row: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let z: f64 = row.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() + bias;
        let p = 1.0 / (1.0 + (-z).exp());
        labels.push(u8::from(rng.random::<f64>() < p));
        rows.push(row);
    }
    // Keep both classes present.
    if labels.iter().all(|&y| y == labels[0]) {
        labels[0] = 1 - labels[0];
    }
    let mut wb = w;
    wb.push(bias);
    (Dataset::from_rows(&rows, labels).unwrap(), wb)
}

/// The default six-learner pool with fewer ensemble members.
pub fn desk_pool(seed: u64) -> Vec<LearnerSpec> {
    default_pool(seed)
        .into_iter()
        .map(|mut s| {
            s.kind = match s.kind {
                LearnerKind::RandomForest(p) => {
                    LearnerKind::RandomForest(ForestParams { n_trees: 25, ..p })
                }
                LearnerKind::GradientBoosting(p) => LearnerKind::GradientBoosting(BoostingParams {
                    n_estimators: 30,
                    ..p
                }),
                other => other,
            };
            s
        })
        .collect()
}

/// Average ranks, ties sharing the mean rank.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}

pub fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
}

/// Writes `data` as a CSV with `id` and `label` columns.
pub fn write_dataset(data: &Dataset, path: &std::path::Path) {
    hardreject_core::data::write_csv(data, path, "label").unwrap();
}
