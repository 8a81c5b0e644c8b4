//! Best-split search with ridge leaves.
//!
//! Numeric features are swept once in sorted order. Both sides start from a
//! direct build (first block of equal values on the left, everything else on
//! the right) and each subsequent block of equal values moves across with
//! rank-one updates, so a sweep costs O(n log n + n d²).
//!
//! Categorical features use one-vs-rest splits. Gram and response sums are
//! accumulated per level in one pass; the "rest" side is the node total minus
//! the level's sums.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LinearFeatureSet};
use crate::linalg;
use crate::ridge::RidgeComponents;

/// Two scores closer than this fraction of the node's Σy² are treated as tied.
///
/// Split scores are `RSS − Σy²`, so their rounding error scales with Σy².
pub const TIE_RTOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    pub lambda: f64,
    pub min_child_size: usize,
    pub lin: LinearFeatureSet,
}

impl SplitConfig {
    pub fn new(lambda: f64, min_child_size: usize, lin: LinearFeatureSet) -> Self {
        assert!(lambda > 0.0, "lambda must be positive");
        assert!(min_child_size >= 1, "min_child_size must be at least 1");
        SplitConfig {
            lambda,
            min_child_size,
            lin,
        }
    }
}

/// How a split routes a feature value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SplitRule {
    /// `value < threshold` goes left.
    Numeric { threshold: f64 },
    /// `value == level` goes left; every other level, including unseen ones, goes right.
    Categorical { level: u32 },
}

impl SplitRule {
    #[inline]
    pub fn goes_left(&self, value: f64) -> bool {
        match *self {
            SplitRule::Numeric { threshold } => value < threshold,
            SplitRule::Categorical { level } => value == level as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature: usize,
    pub rule: SplitRule,
    /// phi(left) + phi(right); add the node's Σy² to get the two-sided RSS.
    pub score: f64,
    pub left_count: usize,
    pub right_count: usize,
}

/// No admissible split exists for the requested rows and feature(s).
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no valid split")]
pub struct NoValidSplit;

/// One admissible boundary of a numeric sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileEntry {
    pub threshold: f64,
    pub left_count: usize,
    pub right_count: usize,
    pub score: f64,
}

/// One admissible level of a categorical scan.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelEntry {
    pub level: u32,
    pub left_count: usize,
    pub right_count: usize,
    pub score: f64,
}

/// Work done by one numeric sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepStats {
    /// Distinct values in the node.
    pub blocks: usize,
    /// Observations moved from the right side to the left by rank-one updates.
    pub rows_moved: usize,
    /// Boundaries at which the objective was evaluated.
    pub evaluations: usize,
}

/// Augmented regressor rows `[x_lin; 1]` for every row of a dataset.
#[derive(Debug, Clone)]
pub struct AugmentedRows {
    dim: usize,
    data: Vec<f64>,
}

impl AugmentedRows {
    pub fn new(ds: &Dataset, lin: &LinearFeatureSet) -> Self {
        let dim = lin.len() + 1;
        let mut data = vec![0.0; ds.n_rows() * dim];
        for (row, chunk) in data.chunks_exact_mut(dim).enumerate() {
            ds.linear_row_into(row, lin, chunk);
        }
        AugmentedRows { dim, data }
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Split search over one dataset with a fixed configuration.
pub struct Splitter<'a> {
    ds: &'a Dataset,
    cfg: &'a SplitConfig,
    aug: Cow<'a, AugmentedRows>,
}

impl<'a> Splitter<'a> {
    pub fn new(ds: &'a Dataset, cfg: &'a SplitConfig) -> Self {
        Splitter {
            ds,
            cfg,
            aug: Cow::Owned(AugmentedRows::new(ds, &cfg.lin)),
        }
    }

    /// Reuses augmented rows already built for `ds` and `cfg.lin`.
    pub fn with_augmented(ds: &'a Dataset, cfg: &'a SplitConfig, aug: &'a AugmentedRows) -> Self {
        debug_assert_eq!(aug.dim(), cfg.lin.len() + 1);
        Splitter {
            ds,
            cfg,
            aug: Cow::Borrowed(aug),
        }
    }

    pub fn augmented(&self) -> &AugmentedRows {
        self.aug.as_ref()
    }

    pub fn config(&self) -> &SplitConfig {
        self.cfg
    }

    fn tie_tolerance(&self, rows: &[usize]) -> f64 {
        let y = self.ds.response();
        TIE_RTOL * rows.iter().map(|&r| y[r] * y[r]).sum::<f64>()
    }

    fn components<'r>(&self, rows: impl IntoIterator<Item = &'r usize>) -> RidgeComponents {
        let y = self.ds.response();
        RidgeComponents::from_rows(rows.into_iter().map(|&r| (self.aug.row(r), y[r])), self.cfg.lambda)
    }

    /// Sweeps a numeric feature, calling `visit` at every admissible boundary.
    /// Returns `None` when the feature is constant over `rows`.
    pub fn sweep_numeric(
        &self,
        rows: &[usize],
        feature: usize,
        mut visit: impl FnMut(ProfileEntry),
    ) -> Option<SweepStats> {
        let order = self.ds.sorted_order(feature, rows);
        let blocks = self.ds.group_distinct(feature, &order);
        if blocks.len() < 2 {
            return None;
        }
        let y = self.ds.response();
        let min_child = self.cfg.min_child_size;
        let split_at = blocks[0].span.end;
        let mut left = self.components(&order[..split_at]);
        let mut right = self.components(&order[split_at..]);
        let mut stats = SweepStats {
            blocks: blocks.len(),
            ..SweepStats::default()
        };
        for j in 0..blocks.len() - 1 {
            if j > 0 {
                for &r in &order[blocks[j].span.clone()] {
                    let z = self.aug.row(r);
                    left.add_observation(z, y[r]);
                    right.remove_observation(z, y[r]);
                    stats.rows_moved += 1;
                }
            }
            let (lc, rc) = (left.count(), right.count());
            if lc >= min_child && rc >= min_child {
                stats.evaluations += 1;
                visit(ProfileEntry {
                    threshold: midpoint(blocks[j].value, blocks[j + 1].value),
                    left_count: lc,
                    right_count: rc,
                    score: left.phi() + right.phi(),
                });
            }
        }
        Some(stats)
    }

    /// Every admissible boundary with its score, in ascending threshold order.
    pub fn numeric_profile(&self, rows: &[usize], feature: usize) -> (Vec<ProfileEntry>, SweepStats) {
        let mut entries = Vec::new();
        let stats = self
            .sweep_numeric(rows, feature, |e| entries.push(e))
            .unwrap_or_default();
        (entries, stats)
    }

    pub fn best_numeric(&self, rows: &[usize], feature: usize) -> Result<SplitCandidate, NoValidSplit> {
        let tol = self.tie_tolerance(rows);
        let mut best: Option<ProfileEntry> = None;
        self.sweep_numeric(rows, feature, |e| {
            if best.as_ref().is_none_or(|b| e.score < b.score - tol) {
                best = Some(e);
            }
        });
        best.map(|e| SplitCandidate {
            feature,
            rule: SplitRule::Numeric { threshold: e.threshold },
            score: e.score,
            left_count: e.left_count,
            right_count: e.right_count,
        })
        .ok_or(NoValidSplit)
    }

    /// One-vs-rest scores for every level present in `rows` that leaves both
    /// sides admissible, in ascending level order.
    pub fn categorical_profile(&self, rows: &[usize], feature: usize) -> Vec<LevelEntry> {
        let codes = self.ds.codes(feature);
        let y = self.ds.response();
        let dim = self.aug.dim();
        let n_levels = codes_len(self.ds, feature);

        let mut g_level = vec![0.0; n_levels * dim * dim];
        let mut s_level = vec![0.0; n_levels * dim];
        let mut count_level = vec![0usize; n_levels];
        for &r in rows {
            let k = codes[r] as usize;
            let z = self.aug.row(r);
            linalg::add_outer(&mut g_level[k * dim * dim..(k + 1) * dim * dim], z, 1.0);
            for (s, zi) in s_level[k * dim..(k + 1) * dim].iter_mut().zip(z) {
                *s += y[r] * zi;
            }
            count_level[k] += 1;
        }
        let present = count_level.iter().filter(|&&c| c > 0).count();
        if present < 2 {
            return Vec::new();
        }

        let mut g_total = vec![0.0; dim * dim];
        let mut s_total = vec![0.0; dim];
        for k in 0..n_levels {
            for (t, v) in g_total.iter_mut().zip(&g_level[k * dim * dim..(k + 1) * dim * dim]) {
                *t += v;
            }
            for (t, v) in s_total.iter_mut().zip(&s_level[k * dim..(k + 1) * dim]) {
                *t += v;
            }
        }

        let total = rows.len();
        let min_child = self.cfg.min_child_size;
        let mut out = Vec::new();
        for k in 0..n_levels {
            let lc = count_level[k];
            let rc = total - lc;
            if lc == 0 || lc < min_child || rc < min_child {
                continue;
            }
            let g_left = g_level[k * dim * dim..(k + 1) * dim * dim].to_vec();
            let s_left = s_level[k * dim..(k + 1) * dim].to_vec();
            let g_right: Vec<f64> = g_total.iter().zip(&g_left).map(|(t, l)| t - l).collect();
            let s_right: Vec<f64> = s_total.iter().zip(&s_left).map(|(t, l)| t - l).collect();
            let left = RidgeComponents::from_sums(g_left, s_left, lc, self.cfg.lambda);
            let right = RidgeComponents::from_sums(g_right, s_right, rc, self.cfg.lambda);
            out.push(LevelEntry {
                level: k as u32,
                left_count: lc,
                right_count: rc,
                score: left.phi() + right.phi(),
            });
        }
        out
    }

    pub fn best_categorical(&self, rows: &[usize], feature: usize) -> Result<SplitCandidate, NoValidSplit> {
        let tol = self.tie_tolerance(rows);
        let mut best: Option<LevelEntry> = None;
        for e in self.categorical_profile(rows, feature) {
            if best.as_ref().is_none_or(|b| e.score < b.score - tol) {
                best = Some(e);
            }
        }
        best.map(|e| SplitCandidate {
            feature,
            rule: SplitRule::Categorical { level: e.level },
            score: e.score,
            left_count: e.left_count,
            right_count: e.right_count,
        })
        .ok_or(NoValidSplit)
    }

    pub fn best_for_feature(&self, rows: &[usize], feature: usize) -> Result<SplitCandidate, NoValidSplit> {
        if self.ds.is_numeric(feature) {
            self.best_numeric(rows, feature)
        } else {
            self.best_categorical(rows, feature)
        }
    }

    /// Best split over `features`; feature-level ties go to the smaller index.
    pub fn best_split(&self, rows: &[usize], features: &[usize]) -> Result<SplitCandidate, NoValidSplit> {
        let mut features = features.to_vec();
        features.sort_unstable();
        features.dedup();
        let tol = self.tie_tolerance(rows);
        let mut best: Option<SplitCandidate> = None;
        for f in features {
            if let Ok(c) = self.best_for_feature(rows, f) {
                if best.as_ref().is_none_or(|b| c.score < b.score - tol) {
                    best = Some(c);
                }
            }
        }
        best.ok_or(NoValidSplit)
    }
}

fn codes_len(ds: &Dataset, feature: usize) -> usize {
    match &ds.column(feature).data {
        crate::dataset::ColumnData::Categorical { levels, .. } => levels.len(),
        crate::dataset::ColumnData::Numeric(_) => panic!("feature {feature} is numeric"),
    }
}

/// (lo + hi) / 2, nudged to `hi` when rounding would make it equal `lo`.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = (lo + hi) / 2.0;
    if mid > lo {
        mid
    } else {
        hi
    }
}

pub fn best_split_numeric(
    ds: &Dataset,
    rows: &[usize],
    feature: usize,
    cfg: &SplitConfig,
) -> Result<SplitCandidate, NoValidSplit> {
    Splitter::new(ds, cfg).best_numeric(rows, feature)
}

pub fn best_split_categorical(
    ds: &Dataset,
    rows: &[usize],
    feature: usize,
    cfg: &SplitConfig,
) -> Result<SplitCandidate, NoValidSplit> {
    Splitter::new(ds, cfg).best_categorical(rows, feature)
}

pub fn best_split_node(
    ds: &Dataset,
    rows: &[usize],
    features: &[usize],
    cfg: &SplitConfig,
) -> Result<SplitCandidate, NoValidSplit> {
    Splitter::new(ds, cfg).best_split(rows, features)
}
