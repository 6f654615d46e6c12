//! Synthetic datasets for the benchmarks.

use hardreject_core::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Two isotropic Gaussian classes in `d` dimensions whose means differ by
/// `separation` along the first axis. A fraction `flip` of labels is inverted.
pub fn gaussian_pair(n: usize, d: usize, separation: f64, flip: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = u8::from(i % 2 == 1);
        let mut row: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        if y == 1 {
            row[0] += separation;
        }
        let flipped = rng.random::<f64>() < flip;
        rows.push(row);
        labels.push(if flipped { 1 - y } else { y });
    }
    Dataset::from_rows(&rows, labels).expect("generated rows are consistent")
}
