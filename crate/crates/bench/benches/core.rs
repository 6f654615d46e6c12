use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use hardreject_bench::gaussian_pair;
use hardreject_core::data::{filter_by_hardness, FilterMode};
use hardreject_core::hardness::{compute_ih, compute_influence, CvProtocol};
use hardreject_core::learners::{default_pool, MainModelConfig};
use hardreject_core::search::{CostWeights, SplitEvaluator, SplitProtocol};
use hardreject_core::selective::{ScoreKind, SelectiveModel};

fn hardness(c: &mut Criterion) {
    let mut g = c.benchmark_group("hardness");
    g.sample_size(10);
    for n in [100, 300] {
        let data = gaussian_pair(n, 4, 1.5, 0.05, 1);
        g.bench_with_input(BenchmarkId::new("ih", n), &data, |b, d| {
            b.iter(|| compute_ih(d, &default_pool(0), &CvProtocol::from_base_seed(0)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("influence", n), &data, |b, d| {
            b.iter(|| compute_influence(d, &CvProtocol::from_base_seed(0), 1e-2).unwrap())
        });
    }
    g.finish();
}

fn selective(c: &mut Criterion) {
    let train = gaussian_pair(500, 6, 1.0, 0.05, 2);
    let test = gaussian_pair(500, 6, 1.0, 0.0, 3);
    let config = MainModelConfig {
        n_estimators: 100,
        ..MainModelConfig::default()
    };
    let mut g = c.benchmark_group("selective");
    g.sample_size(10);
    g.bench_function("fit_100_trees", |b| {
        b.iter(|| SelectiveModel::fit(&train, &config, 5, None).unwrap())
    });
    let model = SelectiveModel::fit(&train, &config, 5, None).unwrap();
    g.bench_function("score_confidence", |b| {
        b.iter(|| {
            model
                .score(black_box(&test), ScoreKind::Confidence)
                .unwrap()
        })
    });
    g.finish();
}

fn search(c: &mut Criterion) {
    let data = gaussian_pair(300, 4, 1.5, 0.05, 4);
    let scores = compute_ih(&data, &default_pool(0), &CvProtocol::from_base_seed(0)).unwrap();
    c.bench_function("filter_fraction", |b| {
        b.iter(|| {
            filter_by_hardness(&data, &scores, black_box(0.2), FilterMode::FractionPerClass)
                .unwrap()
        })
    });
    let model = MainModelConfig {
        n_estimators: 50,
        ..MainModelConfig::default()
    };
    let ev = SplitEvaluator::new(
        &data,
        model,
        SplitProtocol::default(),
        CostWeights::default(),
    )
    .with_filter(&scores, FilterMode::FractionPerClass)
    .with_rejector(ScoreKind::Confidence);
    let outcomes = ev.outcomes(0.2).unwrap();
    let mut g = c.benchmark_group("search");
    g.sample_size(10);
    g.bench_function("outcomes_one_t_f", |b| {
        b.iter(|| ev.outcomes(black_box(0.2)).unwrap())
    });
    g.bench_function("best_rejection_over_grid", |b| {
        b.iter(|| ev.best_for_outcomes(&outcomes, 0.2).unwrap())
    });
    g.finish();
}

criterion_group!(benches, hardness, selective, search);
criterion_main!(benches);
