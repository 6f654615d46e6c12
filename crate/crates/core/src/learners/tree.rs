//! Level-wise exact-greedy tree growth shared by CART, random forests and
//! gradient boosting.
//!
//! Every feature column is sorted once per dataset. Each depth level then
//! makes one pass per feature over the sorted order and accumulates
//! left-side statistics for every open node, so one level costs
//! `O(n_features * n_rows)` whatever the number of nodes.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;

const NO_SLOT: u32 = u32::MAX;

/// Column-major copy of a dataset's features plus per-feature sort orders.
pub(crate) struct ColumnData {
    cols: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
    n_rows: usize,
}

impl ColumnData {
    pub(crate) fn new(ds: &Dataset) -> Self {
        let n = ds.len();
        let d = ds.n_features();
        let mut cols = vec![Vec::with_capacity(n); d];
        for i in 0..n {
            for (j, &v) in ds.row(i).iter().enumerate() {
                cols[j].push(v);
            }
        }
        let order = cols
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        ColumnData {
            cols,
            order,
            n_rows: n,
        }
    }

    pub(crate) fn n_features(&self) -> usize {
        self.cols.len()
    }

    pub(crate) fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub(crate) fn value(&self, row: usize, feature: usize) -> f64 {
        self.cols[feature][row]
    }
}

pub(crate) trait SplitStats: Copy + Default {
    fn add(&mut self, other: &Self);
    fn minus(&self, other: &Self) -> Self;
}

pub(crate) trait Criterion {
    type Stats: SplitStats;
    /// Gain of splitting `parent` into `left`/`right`, `None` if the split is not allowed.
    fn gain(&self, left: &Self::Stats, right: &Self::Stats, parent: &Self::Stats) -> Option<f64>;
    fn leaf_value(&self, stats: &Self::Stats) -> f64;
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Binary tree; rows with `x[feature] < threshold` go left. Root is node 0.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[feature] < threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    pub(crate) fn predict_column_row(&self, data: &ColumnData, row: usize) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if data.value(row, feature) < threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

pub(crate) struct GrowParams<'a> {
    pub max_depth: Option<usize>,
    /// Features the tree may use (column subsampling); all when `None`.
    pub tree_features: Option<&'a [usize]>,
    /// Random features drawn per node (random-forest style); all when `None`.
    pub features_per_node: Option<usize>,
}

struct Slot<S> {
    node: usize,
    total: S,
    allowed: Option<Vec<bool>>,
}

struct BestSplit<S> {
    gain: f64,
    feature: usize,
    threshold: f64,
    left: S,
}

/// Grows one tree. `row_stats[r]` is the contribution of row `r`; rows with
/// `in_sample[r] == false` are ignored.
pub(crate) fn grow<C: Criterion, R: Rng>(
    data: &ColumnData,
    row_stats: &[C::Stats],
    in_sample: &[bool],
    criterion: &C,
    params: &GrowParams<'_>,
    rng: &mut R,
) -> Tree {
    let n = data.n_rows();
    let d = data.n_features();
    let tree_features: Vec<usize> = match params.tree_features {
        Some(f) => f.to_vec(),
        None => (0..d).collect(),
    };
    let draw_allowed = |rng: &mut R| -> Option<Vec<bool>> {
        let m = params.features_per_node?;
        if m >= tree_features.len() {
            return None;
        }
        let mut mask = vec![false; d];
        for k in sample(rng, tree_features.len(), m).into_iter() {
            mask[tree_features[k]] = true;
        }
        Some(mask)
    };

    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut slot_of_row = vec![NO_SLOT; n];
    let mut root_total = C::Stats::default();
    for r in 0..n {
        if in_sample[r] {
            slot_of_row[r] = 0;
            root_total.add(&row_stats[r]);
        }
    }
    let mut frontier = vec![Slot {
        node: 0,
        total: root_total,
        allowed: draw_allowed(rng),
    }];
    let mut depth = 0usize;

    while !frontier.is_empty() {
        let at_limit = params.max_depth.is_some_and(|m| depth >= m);
        let mut best: Vec<Option<BestSplit<C::Stats>>> =
            (0..frontier.len()).map(|_| None).collect();

        if !at_limit {
            let mut acc = vec![C::Stats::default(); frontier.len()];
            let mut last = vec![f64::NAN; frontier.len()];
            for &f in &tree_features {
                acc.iter_mut().for_each(|a| *a = C::Stats::default());
                last.iter_mut().for_each(|l| *l = f64::NAN);
                let col = &data.cols[f];
                for &r in &data.order[f] {
                    let s = slot_of_row[r as usize];
                    if s == NO_SLOT {
                        continue;
                    }
                    let s = s as usize;
                    if let Some(mask) = &frontier[s].allowed {
                        if !mask[f] {
                            continue;
                        }
                    }
                    let v = col[r as usize];
                    let prev = last[s];
                    if !prev.is_nan() && v > prev {
                        let left = acc[s];
                        let right = frontier[s].total.minus(&left);
                        if let Some(g) = criterion.gain(&left, &right, &frontier[s].total) {
                            if best[s].as_ref().is_none_or(|b| g > b.gain) {
                                let mut thr = 0.5 * (prev + v);
                                if !(thr > prev) {
                                    thr = v;
                                }
                                best[s] = Some(BestSplit {
                                    gain: g,
                                    feature: f,
                                    threshold: thr,
                                    left,
                                });
                            }
                        }
                    }
                    acc[s].add(&row_stats[r as usize]);
                    last[s] = v;
                }
            }
        }

        // Close leaves, open children, then route rows.
        let mut next = Vec::new();
        let mut route: Vec<Option<(usize, f64, u32, u32)>> = Vec::with_capacity(frontier.len());
        for (s, slot) in frontier.iter().enumerate() {
            match best[s].take() {
                Some(b) => {
                    let left_node = nodes.len();
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[slot.node] = Node::Split {
                        feature: b.feature,
                        threshold: b.threshold,
                        left: left_node,
                        right: left_node + 1,
                    };
                    let li = next.len() as u32;
                    next.push(Slot {
                        node: left_node,
                        total: b.left,
                        allowed: draw_allowed(rng),
                    });
                    next.push(Slot {
                        node: left_node + 1,
                        total: slot.total.minus(&b.left),
                        allowed: draw_allowed(rng),
                    });
                    route.push(Some((b.feature, b.threshold, li, li + 1)));
                }
                None => {
                    nodes[slot.node] = Node::Leaf {
                        value: criterion.leaf_value(&slot.total),
                    };
                    route.push(None);
                }
            }
        }
        for r in 0..n {
            let s = slot_of_row[r];
            if s == NO_SLOT {
                continue;
            }
            slot_of_row[r] = match route[s as usize] {
                Some((f, thr, l, rt)) => {
                    if data.cols[f][r] < thr {
                        l
                    } else {
                        rt
                    }
                }
                None => NO_SLOT,
            };
        }
        frontier = next;
        depth += 1;
    }
    Tree { nodes }
}

/// (count, weight, weighted positives) for Gini splits.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct ClassStats {
    pub count: f64,
    pub weight: f64,
    pub positive: f64,
}

impl SplitStats for ClassStats {
    fn add(&mut self, o: &Self) {
        self.count += o.count;
        self.weight += o.weight;
        self.positive += o.positive;
    }
    fn minus(&self, o: &Self) -> Self {
        ClassStats {
            count: self.count - o.count,
            weight: self.weight - o.weight,
            positive: self.positive - o.positive,
        }
    }
}

pub(crate) struct Gini {
    pub min_samples_leaf: usize,
}

fn gini_mass(s: &ClassStats) -> f64 {
    if s.weight <= 0.0 {
        return 0.0;
    }
    let p = s.positive / s.weight;
    s.weight * 2.0 * p * (1.0 - p)
}

impl Criterion for Gini {
    type Stats = ClassStats;
    fn gain(&self, l: &ClassStats, r: &ClassStats, parent: &ClassStats) -> Option<f64> {
        let min = self.min_samples_leaf as f64 - 0.5;
        if l.count < min || r.count < min {
            return None;
        }
        let g = gini_mass(parent) - gini_mass(l) - gini_mass(r);
        (g > 1e-12).then_some(g)
    }
    fn leaf_value(&self, s: &ClassStats) -> f64 {
        if s.weight > 0.0 {
            (s.positive / s.weight).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }
}

/// First and second derivatives of the loss summed over a node.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct GradStats {
    pub grad: f64,
    pub hess: f64,
}

impl SplitStats for GradStats {
    fn add(&mut self, o: &Self) {
        self.grad += o.grad;
        self.hess += o.hess;
    }
    fn minus(&self, o: &Self) -> Self {
        GradStats {
            grad: self.grad - o.grad,
            hess: self.hess - o.hess,
        }
    }
}

/// Second-order boosting split gain with L2 leaf penalty and split cost.
pub(crate) struct SecondOrder {
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub learning_rate: f64,
}

impl SecondOrder {
    fn score(&self, s: &GradStats) -> f64 {
        s.grad * s.grad / (s.hess + self.lambda)
    }
}

impl Criterion for SecondOrder {
    type Stats = GradStats;
    fn gain(&self, l: &GradStats, r: &GradStats, parent: &GradStats) -> Option<f64> {
        if l.hess < self.min_child_weight || r.hess < self.min_child_weight {
            return None;
        }
        let g = 0.5 * (self.score(l) + self.score(r) - self.score(parent)) - self.gamma;
        (g > 1e-12).then_some(g)
    }
    fn leaf_value(&self, s: &GradStats) -> f64 {
        -self.learning_rate * s.grad / (s.hess + self.lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn class_stats(ds: &Dataset) -> Vec<ClassStats> {
        ds.labels()
            .iter()
            .map(|&y| ClassStats {
                count: 1.0,
                weight: 1.0,
                positive: y as f64,
            })
            .collect()
    }

    #[test]
    fn gini_tree_separates_threshold_data() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64, (i * 7 % 3) as f64])
            .collect();
        let labels = (0..10).map(|i| u8::from(i >= 6)).collect();
        let ds = Dataset::from_rows(&rows, labels).unwrap();
        let data = ColumnData::new(&ds);
        let stats = class_stats(&ds);
        let tree = grow(
            &data,
            &stats,
            &[true; 10],
            &Gini {
                min_samples_leaf: 1,
            },
            &GrowParams {
                max_depth: None,
                tree_features: None,
                features_per_node: None,
            },
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert_eq!(tree.depth(), 1);
        for i in 0..10 {
            assert_eq!(tree.predict(ds.row(i)), ds.labels()[i] as f64);
        }
        match &tree.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 5.5);
            }
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn depth_limit_is_respected() {
        let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64]).collect();
        let labels = (0..64).map(|i| (i % 2) as u8).collect();
        let ds = Dataset::from_rows(&rows, labels).unwrap();
        let data = ColumnData::new(&ds);
        let tree = grow(
            &data,
            &class_stats(&ds),
            &[true; 64],
            &Gini {
                min_samples_leaf: 1,
            },
            &GrowParams {
                max_depth: Some(3),
                tree_features: None,
                features_per_node: None,
            },
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(tree.depth() <= 3);
    }

    #[test]
    fn constant_feature_gives_a_single_leaf() {
        let rows = vec![vec![1.0]; 6];
        let ds = Dataset::from_rows(&rows, vec![0, 1, 0, 1, 0, 1]).unwrap();
        let data = ColumnData::new(&ds);
        let tree = grow(
            &data,
            &class_stats(&ds),
            &[true; 6],
            &Gini {
                min_samples_leaf: 1,
            },
            &GrowParams {
                max_depth: None,
                tree_features: None,
                features_per_node: None,
            },
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert_eq!(tree.n_nodes(), 1);
        assert_eq!(tree.predict(&[1.0]), 0.5);
    }
}
