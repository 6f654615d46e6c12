mod common;

use ndarray::Array1;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hardreject_core::data::{filter_by_hardness, removed_count, FilterMode};
use hardreject_core::evaluation::metrics_from_parts;
use hardreject_core::hardness::{influence_values, HardnessMethod, HardnessScores};
use hardreject_core::learners::fit_logistic_weights;
use hardreject_core::search::{best_over_grid, cost, CostBreakdown, CostWeights};
use hardreject_core::selective::{
    calibrated_proba, certainty_from_member_probs, decide, CalibrationParams,
};
use hardreject_core::Dataset;

fn dataset(labels: &[u8]) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..labels.len()).map(|i| vec![i as f64]).collect();
    Dataset::from_rows(&rows, labels.to_vec()).unwrap()
}

fn scores_for(ds: &Dataset, values: &[f64]) -> HardnessScores {
    HardnessScores::from_pairs(
        HardnessMethod::InstanceHardness,
        ds.ids().iter().cloned().zip(values.iter().copied()),
    )
}

fn labelled_scores() -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
    (4usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(0.0f64..1.0, n),
        )
    })
}

proptest! {
    #[test]
    fn fraction_filter_keeps_a_subset(
        (labels, values) in labelled_scores(),
        t_f in 0.0f64..=0.5,
    ) {
        let ds = dataset(&labels);
        let kept = filter_by_hardness(&ds, &scores_for(&ds, &values), t_f, FilterMode::FractionPerClass).unwrap();
        let counts = ds.class_counts();
        let kept_counts = kept.class_counts();
        for c in 0..2 {
            prop_assert_eq!(kept_counts[c], counts[c] - removed_count(t_f, counts[c]));
        }
        let all: std::collections::HashSet<&String> = ds.ids().iter().collect();
        prop_assert!(kept.ids().iter().all(|id| all.contains(id)));
    }

    #[test]
    fn score_filter_drops_exactly_the_harder_rows(
        (labels, values) in labelled_scores(),
        t_f in 0.0f64..=1.0,
    ) {
        let ds = dataset(&labels);
        let kept = filter_by_hardness(&ds, &scores_for(&ds, &values), t_f, FilterMode::ScoreThreshold).unwrap();
        let expected = values.iter().filter(|&&s| s <= t_f).count();
        prop_assert_eq!(kept.len(), expected);
    }

    #[test]
    fn metrics_stay_in_unit_interval(
        rows in prop::collection::vec((0u8..2, 0u8..2, any::<bool>(), 0.5f64..=1.0), 1..80),
    ) {
        let truth: Vec<u8> = rows.iter().map(|r| r.0).collect();
        let predicted: Vec<u8> = rows.iter().map(|r| r.1).collect();
        let accepted: Vec<bool> = rows.iter().map(|r| r.2).collect();
        let scores: Vec<f64> = rows.iter().map(|r| r.3).collect();
        let m = metrics_from_parts(&truth, &predicted, &accepted, &scores);
        for v in [m.precision_0, m.precision_1, m.recall_0, m.recall_1, m.macro_f1, m.acceptance_0, m.acceptance_1, m.mean_score] {
            prop_assert!((0.0..=1.0).contains(&v), "{v}");
        }
        prop_assert_eq!(m.n_accepted, m.accepted_0 + m.accepted_1);
        prop_assert_eq!(m.n_accepted, accepted.iter().filter(|&&a| a).count());
    }

    #[test]
    fn decide_is_monotone(s in 0.0f64..=1.0, a in 0.5f64..=1.0, b in 0.5f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if decide(s, hi).is_accepted() {
            prop_assert!(decide(s, lo).is_accepted());
        }
        prop_assert_eq!(decide(s, s).is_accepted(), true);
    }

    #[test]
    fn certainty_is_permutation_equivariant(
        probs in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 3), 2..30),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let base = certainty_from_member_probs(&probs).unwrap();
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled: Vec<Vec<f64>> = order.iter().map(|&i| probs[i].clone()).collect();
        let perm = certainty_from_member_probs(&shuffled).unwrap();
        for (k, &i) in order.iter().enumerate() {
            prop_assert!((perm.scores[k] - base.scores[i]).abs() <= 1e-12);
        }
        prop_assert!(base.scores.iter().all(|s| (0.5..=1.0).contains(s)));
    }

    #[test]
    fn calibrated_proba_is_monotone(a in 1e-3f64..50.0, b in -20.0f64..20.0, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let p = CalibrationParams { a, b, clamped: false, degenerate: false };
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        prop_assert!(calibrated_proba(&p, lo) <= calibrated_proba(&p, hi));
    }

    #[test]
    fn cost_is_monotone(
        f1 in 0.0f64..=1.0, rr in 0.0f64..=1.0, c in 0.0f64..=1.0, delta in 0.0f64..=0.5,
    ) {
        let w = CostWeights::default();
        let base = cost(f1, rr, c, &w);
        prop_assert!(cost((f1 + delta).min(1.0), rr, c, &w) <= base);
        prop_assert!(cost(f1, (rr + delta).min(1.0), c, &w) >= base);
        prop_assert!(cost(f1, rr, (c + delta).min(1.0), &w) <= base);
    }

    #[test]
    fn best_over_grid_ignores_order(
        costs in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0), 2..26),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let w = CostWeights::default();
        let grid: Vec<f64> = (0..costs.len()).map(|i| 0.5 + 0.02 * i as f64).collect();
        let at = |t: f64| {
            let i = ((t - 0.5) / 0.02).round() as usize;
            let (f, r, c) = costs[i];
            CostBreakdown::new(0.0, t, f, r, c, &w)
        };
        let forward = best_over_grid(&grid, at).unwrap();
        let mut shuffled = grid.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let permuted = best_over_grid(&shuffled, at).unwrap();
        prop_assert_eq!(forward.t_r, permuted.t_r);
        prop_assert_eq!(forward.cost, permuted.cost);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Influence is linear in the validation gradient: the value against a
    // union of validation sets is the size-weighted mean of the parts.
    #[test]
    fn influence_is_linear_in_validation_set(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (data, _) = common::logistic_problem(60, 3, &mut rng);
        let idx: Vec<usize> = (0..60).collect();
        let train = data.select(&idx[..30]);
        let (va, vb) = (data.select(&idx[30..40]), data.select(&idx[40..]));
        let both = data.select(&idx[30..]);
        let w: Array1<f64> = fit_logistic_weights(&train, 1e-2, 200, 1e-12).unwrap().weights;
        let ia = influence_values(&w, &train, &va, 1e-2).unwrap();
        let ib = influence_values(&w, &train, &vb, 1e-2).unwrap();
        let iab = influence_values(&w, &train, &both, 1e-2).unwrap();
        for i in 0..train.len() {
            let mixed = (10.0 * ia[i] + 20.0 * ib[i]) / 30.0;
            prop_assert!((iab[i] - mixed).abs() <= 1e-9 * (1.0 + iab[i].abs()), "{} vs {}", iab[i], mixed);
        }
    }
}
