//! Linear regression trees.
//!
//! Each node takes the best ridge split over an `mtry` sample of features and
//! keeps it only if a k-fold cross-validated look-ahead says the two child
//! models improve the held-out R² of the parent model by more than
//! `min_split_gain`. Leaves hold ridge models.
//!
//! All per-node randomness (feature sample, fold assignment) is seeded from
//! the tree seed and a node id derived from the path to the node, so two trees
//! grown with the same seed and different `min_split_gain` make identical
//! choices wherever both reach a node.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LinearFeatureSet};
use crate::linalg;
use crate::ridge::{LeafModel, RidgeComponents};
use crate::seed;
use crate::splitter::{AugmentedRows, SplitCandidate, SplitConfig, Splitter};

pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingConfig {
    /// Minimum cross-validated R² gain for a split to be kept.
    pub min_split_gain: f64,
    pub folds: usize,
    /// Nodes with fewer split rows than this become leaves.
    pub nodesize_spl: usize,
}

impl Default for StoppingConfig {
    fn default() -> Self {
        StoppingConfig {
            min_split_gain: 0.0,
            folds: DEFAULT_FOLDS,
            nodesize_spl: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub cfg: SplitConfig,
    pub stop: StoppingConfig,
    pub seed: u64,
}

/// Draws the candidate split features at each node, without replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSampler {
    pub features: Vec<usize>,
    pub mtry: usize,
}

impl FeatureSampler {
    pub fn all(n_features: usize) -> Self {
        FeatureSampler {
            features: (0..n_features).collect(),
            mtry: n_features,
        }
    }

    pub fn new(n_features: usize, mtry: usize) -> Self {
        assert!(mtry >= 1 && mtry <= n_features, "mtry must be in [1, {n_features}]");
        FeatureSampler {
            features: (0..n_features).collect(),
            mtry,
        }
    }

    /// Sampled features in ascending order.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        if self.mtry >= self.features.len() {
            return self.features.clone();
        }
        let mut picked: Vec<usize> = index::sample(rng, self.features.len(), self.mtry)
            .into_iter()
            .map(|i| self.features[i])
            .collect();
        picked.sort_unstable();
        picked
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub model: LeafModel,
    /// Rows the leaf model was fitted on.
    pub n_aggregation: usize,
    /// Set when an honest leaf received no aggregation rows and was fitted on
    /// its split rows instead.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        split: SplitCandidate,
        /// Cross-validated R² gain that admitted the split.
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf(Leaf),
}

impl TreeNode {
    /// Routes an encoded feature row to its leaf.
    pub fn leaf_for(&self, x: &[f64]) -> &Leaf {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf(leaf) => return leaf,
                TreeNode::Internal { split, left, right, .. } => {
                    node = if split.rule.goes_left(x[split.feature]) { left } else { right };
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 1,
            TreeNode::Internal { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<&Leaf> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            match node {
                TreeNode::Leaf(l) => out.push(l),
                TreeNode::Internal { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    /// True when `self` equals `other` with some internal nodes of `other`
    /// collapsed into leaves.
    pub fn is_pruned_subtree_of(&self, other: &TreeNode) -> bool {
        match (self, other) {
            (TreeNode::Leaf(_), _) => true,
            (
                TreeNode::Internal { split, left, right, .. },
                TreeNode::Internal {
                    split: s2,
                    left: l2,
                    right: r2,
                    ..
                },
            ) => split == s2 && left.is_pruned_subtree_of(l2) && right.is_pruned_subtree_of(r2),
            (TreeNode::Internal { .. }, TreeNode::Leaf(_)) => false,
        }
    }

    /// Text rendering of the split structure alone (no leaf models), in pre-order.
    pub fn structure(&self) -> String {
        let mut out = String::new();
        self.write_structure(&mut out);
        out
    }

    fn write_structure(&self, out: &mut String) {
        match self {
            TreeNode::Leaf(_) => out.push_str("L;"),
            TreeNode::Internal { split, gain, left, right } => {
                out.push_str(&format!(
                    "S({},{},{:016x},{},{},{:016x});",
                    split.feature,
                    serde_json::to_string(&split.rule).expect("rule serializes"),
                    split.score.to_bits(),
                    split.left_count,
                    split.right_count,
                    gain.to_bits()
                ));
                left.write_structure(out);
                right.write_structure(out);
            }
        }
    }
}

/// Prediction of the leaf `x` falls into.
pub fn predict_tree(tree: &TreeNode, x: &[f64], lin: &LinearFeatureSet) -> f64 {
    let model = &tree.leaf_for(x).model;
    model
        .beta
        .iter()
        .zip(lin.indices())
        .map(|(b, &f)| b * x[f])
        .sum::<f64>()
        + model.intercept
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafSummary {
    pub n_aggregation: usize,
    pub fallback: bool,
    pub intercept: f64,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeAudit {
    pub depth: usize,
    pub node_count: usize,
    pub leaf_count: usize,
    /// Leaves in left-to-right order.
    pub leaves: Vec<LeafSummary>,
    /// Smallest stored CV gain over internal nodes, if any.
    pub min_gain: Option<f64>,
}

impl TreeAudit {
    /// Σ n_aggregation over leaves that were fitted on aggregation rows.
    pub fn aggregation_rows(&self) -> usize {
        self.leaves.iter().filter(|l| !l.fallback).map(|l| l.n_aggregation).sum()
    }
}

pub fn audit_tree(tree: &TreeNode) -> TreeAudit {
    fn min_gain(node: &TreeNode) -> Option<f64> {
        match node {
            TreeNode::Leaf(_) => None,
            TreeNode::Internal { gain, left, right, .. } => Some(
                [min_gain(left), min_gain(right)]
                    .into_iter()
                    .flatten()
                    .fold(*gain, f64::min),
            ),
        }
    }
    let leaves: Vec<LeafSummary> = tree
        .leaves()
        .into_iter()
        .map(|l| LeafSummary {
            n_aggregation: l.n_aggregation,
            fallback: l.fallback,
            intercept: l.model.intercept,
            beta: l.model.beta.clone(),
        })
        .collect();
    TreeAudit {
        depth: tree.depth(),
        node_count: tree.node_count(),
        leaf_count: leaves.len(),
        leaves,
        min_gain: min_gain(tree),
    }
}

/// Held-out R² gain of splitting `node_rows` into `left_rows` and the rest,
/// estimated by k-fold cross-validation. `None` when the node response has
/// zero total variation.
///
/// Within each fold the parent model is fitted on the fold's complement and
/// the child models on the complement's left and right parts. A child cell
/// that is empty falls back to the parent's held-out predictions.
pub fn cv_gain(
    aug: &AugmentedRows,
    y: &[f64],
    node_rows: &[usize],
    in_left: impl Fn(usize) -> bool,
    folds: usize,
    lambda: f64,
    rng: &mut ChaCha8Rng,
) -> Option<f64> {
    let n = node_rows.len();
    assert!(n >= 2, "look-ahead needs at least two rows");
    let k = folds.clamp(2, n);
    let dim = aug.dim();

    let mean = node_rows.iter().map(|&r| y[r]).sum::<f64>() / n as f64;
    let total_variation: f64 = node_rows.iter().map(|&r| (y[r] - mean).powi(2)).sum();
    if total_variation <= 0.0 {
        return None;
    }

    let is_left: Vec<bool> = node_rows.iter().map(|&r| in_left(r)).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);

    let mut all = Sums::new(dim);
    let mut left = Sums::new(dim);
    for (i, &r) in node_rows.iter().enumerate() {
        all.add(aug.row(r), y[r]);
        if is_left[i] {
            left.add(aug.row(r), y[r]);
        }
    }
    let right = all.minus(&left);

    let mut rss_parent = 0.0;
    let mut rss_child = 0.0;
    for f in 0..k {
        let fold = &perm[f * n / k..(f + 1) * n / k];
        let mut fold_all = Sums::new(dim);
        let mut fold_left = Sums::new(dim);
        for &i in fold {
            let r = node_rows[i];
            fold_all.add(aug.row(r), y[r]);
            if is_left[i] {
                fold_left.add(aug.row(r), y[r]);
            }
        }
        let fold_right = fold_all.minus(&fold_left);

        let parent = all.minus(&fold_all).fit(lambda).expect("fold complement is non-empty");
        let left_model = left.minus(&fold_left).fit(lambda);
        let right_model = right.minus(&fold_right).fit(lambda);

        for &i in fold {
            let r = node_rows[i];
            let z = aug.row(r);
            let p = predict_augmented(&parent, z);
            let child = if is_left[i] { &left_model } else { &right_model };
            let c = child.as_ref().map_or(p, |m| predict_augmented(m, z));
            rss_parent += (y[r] - p).powi(2);
            rss_child += (y[r] - c).powi(2);
        }
    }
    Some((rss_parent - rss_child) / total_variation)
}

/// True when the look-ahead gain of the split exceeds `stop.min_split_gain`.
pub fn check_split(
    ds: &Dataset,
    lin: &LinearFeatureSet,
    node_rows: &[usize],
    left_rows: &[usize],
    stop: &StoppingConfig,
    lambda: f64,
    seed: u64,
) -> bool {
    let aug = AugmentedRows::new(ds, lin);
    let left: std::collections::HashSet<usize> = left_rows.iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cv_gain(&aug, ds.response(), node_rows, |r| left.contains(&r), stop.folds, lambda, &mut rng)
        .is_some_and(|g| g > stop.min_split_gain)
}

fn predict_augmented(m: &LeafModel, z: &[f64]) -> f64 {
    linalg::dot(&m.beta, &z[..m.beta.len()]) + m.intercept
}

#[derive(Clone)]
struct Sums {
    g: Vec<f64>,
    s: Vec<f64>,
    count: usize,
}

impl Sums {
    fn new(dim: usize) -> Self {
        Sums {
            g: vec![0.0; dim * dim],
            s: vec![0.0; dim],
            count: 0,
        }
    }

    fn add(&mut self, z: &[f64], y: f64) {
        linalg::add_outer(&mut self.g, z, 1.0);
        for (s, zi) in self.s.iter_mut().zip(z) {
            *s += y * zi;
        }
        self.count += 1;
    }

    fn minus(&self, other: &Sums) -> Sums {
        Sums {
            g: self.g.iter().zip(&other.g).map(|(a, b)| a - b).collect(),
            s: self.s.iter().zip(&other.s).map(|(a, b)| a - b).collect(),
            count: self.count - other.count,
        }
    }

    fn fit(self, lambda: f64) -> Option<LeafModel> {
        (self.count > 0).then(|| RidgeComponents::from_sums(self.g, self.s, self.count, lambda).solve_leaf())
    }
}

const FEATURE_STREAM: u64 = 1;
const FOLD_STREAM: u64 = 2;

fn child_id(id: u64, right: bool) -> u64 {
    seed::derive(id, if right { 0x52 } else { 0x4c })
}

/// Grows one tree.
///
/// With `agg_rows = Some(..)` the structure is chosen from `split_rows` only and
/// leaf models are fitted on the aggregation rows that reach each leaf.
pub fn build_tree(
    ds: &Dataset,
    split_rows: &[usize],
    agg_rows: Option<&[usize]>,
    params: &TreeParams,
    sampler: &FeatureSampler,
) -> TreeNode {
    let aug = AugmentedRows::new(ds, &params.cfg.lin);
    build_tree_with(ds, &aug, split_rows, agg_rows, params, sampler)
}

/// [`build_tree`] with augmented rows shared across trees.
pub fn build_tree_with(
    ds: &Dataset,
    aug: &AugmentedRows,
    split_rows: &[usize],
    agg_rows: Option<&[usize]>,
    params: &TreeParams,
    sampler: &FeatureSampler,
) -> TreeNode {
    assert!(!split_rows.is_empty(), "a tree needs at least one row");
    let grower = Grower {
        ds,
        aug,
        splitter: Splitter::with_augmented(ds, &params.cfg, aug),
        params,
        sampler,
    };
    grower.grow(split_rows.to_vec(), agg_rows.map(<[usize]>::to_vec), seed::derive(params.seed, 0))
}

struct Grower<'a> {
    ds: &'a Dataset,
    aug: &'a AugmentedRows,
    splitter: Splitter<'a>,
    params: &'a TreeParams,
    sampler: &'a FeatureSampler,
}

impl Grower<'_> {
    fn grow(&self, split_rows: Vec<usize>, agg_rows: Option<Vec<usize>>, id: u64) -> TreeNode {
        let stop = &self.params.stop;
        if split_rows.len() < stop.nodesize_spl.max(2) {
            return self.leaf(&split_rows, agg_rows.as_deref());
        }
        let mut feature_rng = ChaCha8Rng::seed_from_u64(seed::derive(id, FEATURE_STREAM));
        let features = self.sampler.sample(&mut feature_rng);
        let Ok(split) = self.splitter.best_split(&split_rows, &features) else {
            return self.leaf(&split_rows, agg_rows.as_deref());
        };

        let goes_left = |r: usize| split.rule.goes_left(self.ds.value(split.feature, r));
        let mut fold_rng = ChaCha8Rng::seed_from_u64(seed::derive(id, FOLD_STREAM));
        let gain = cv_gain(
            self.aug,
            self.ds.response(),
            &split_rows,
            goes_left,
            stop.folds,
            self.params.cfg.lambda,
            &mut fold_rng,
        );
        let gain = match gain {
            Some(g) if g > stop.min_split_gain => g,
            _ => return self.leaf(&split_rows, agg_rows.as_deref()),
        };

        let (split_l, split_r): (Vec<usize>, Vec<usize>) = split_rows.iter().partition(|&&r| goes_left(r));
        let (agg_l, agg_r) = match agg_rows {
            Some(rows) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| goes_left(r));
                (Some(l), Some(r))
            }
            None => (None, None),
        };
        drop(split_rows);
        let left = self.grow(split_l, agg_l, child_id(id, false));
        let right = self.grow(split_r, agg_r, child_id(id, true));
        TreeNode::Internal {
            split,
            gain,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn leaf(&self, split_rows: &[usize], agg_rows: Option<&[usize]>) -> TreeNode {
        let (rows, fallback) = match agg_rows {
            Some(a) if !a.is_empty() => (a, false),
            Some(_) => (split_rows, true),
            None => (split_rows, false),
        };
        let y = self.ds.response();
        let comps = RidgeComponents::from_rows(
            rows.iter().map(|&r| (self.aug.row(r), y[r])),
            self.params.cfg.lambda,
        );
        TreeNode::Leaf(Leaf {
            model: comps.solve_leaf(),
            n_aggregation: rows.len(),
            fallback,
        })
    }
}
