//! Bagged ensembles of linear regression trees.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LinearFeatureSet, Schema};
use crate::error::{Error, Result};
use crate::seed;
use crate::splitter::{AugmentedRows, SplitConfig};
use crate::tree::{build_tree_with, predict_tree, FeatureSampler, StoppingConfig, TreeNode, TreeParams};

pub const MODEL_FORMAT: &str = "linforest-model";
pub const MODEL_VERSION: u32 = 1;

const RESAMPLE_STREAM: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub ntree: usize,
    /// Candidate split features per node. `None` means max(1, d/3).
    pub mtry: Option<usize>,
    /// Ridge penalty on leaf slopes, used for splitting, stopping and leaves.
    pub lambda: f64,
    pub min_split_gain: f64,
    pub folds: usize,
    /// Smallest node that may be split; also the smallest child a split may create.
    pub nodesize_spl: usize,
    pub sample_fraction: f64,
    pub splitratio: f64,
    pub honest: bool,
    /// Names of the numeric columns used in leaf models. `None` uses every numeric column.
    pub lin: Option<Vec<String>>,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            ntree: 100,
            mtry: None,
            lambda: 1.0,
            min_split_gain: 0.0,
            folds: crate::tree::DEFAULT_FOLDS,
            nodesize_spl: 5,
            sample_fraction: 1.0,
            splitratio: 1.0,
            honest: false,
            lin: None,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn resolved_mtry(&self, n_features: usize) -> usize {
        self.mtry.unwrap_or((n_features / 3).max(1))
    }

    /// Checks every setting against a design with `n_features` columns.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.ntree < 1 {
            return fail("ntree must be at least 1".into());
        }
        let mtry = self.resolved_mtry(n_features);
        if mtry < 1 || mtry > n_features {
            return fail(format!("mtry must be in [1, {n_features}], got {mtry}"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be positive and finite, got {}", self.lambda));
        }
        if self.min_split_gain.is_nan() || self.min_split_gain < 0.0 {
            return fail(format!("min_split_gain must be non-negative, got {}", self.min_split_gain));
        }
        if self.folds < 2 {
            return fail(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.nodesize_spl < 2 {
            return fail(format!("nodesize_spl must be at least 2, got {}", self.nodesize_spl));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return fail(format!("sample_fraction must be in (0, 1], got {}", self.sample_fraction));
        }
        if !(self.splitratio > 0.0 && self.splitratio <= 1.0) {
            return fail(format!("splitratio must be in (0, 1], got {}", self.splitratio));
        }
        if self.honest && self.splitratio >= 1.0 {
            return fail("honest forests need splitratio < 1".into());
        }
        Ok(())
    }

    fn linear_set(&self, ds: &Dataset) -> Result<LinearFeatureSet> {
        let set = match &self.lin {
            Some(names) => LinearFeatureSet::from_names(names, ds),
            None => LinearFeatureSet::all_numeric(ds),
        };
        set.map_err(|e| Error::Config(format!("linear features: {e}")))
    }
}

/// One fitted tree plus the rows it was grown from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub seed: u64,
    pub root: TreeNode,
    /// Distinct rows that chose the structure (honest forests only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub split_set: Vec<usize>,
    /// Distinct rows that fitted the leaf models (honest forests only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agg_set: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub rmse: f64,
    pub mse: f64,
    pub n: usize,
}

impl Metrics {
    pub fn from_predictions(pred: &[f64], truth: &[f64]) -> Result<Metrics> {
        assert_eq!(pred.len(), truth.len());
        if pred.is_empty() {
            return Err(Error::EmptyTestSet);
        }
        let mse = pred.iter().zip(truth).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / pred.len() as f64;
        Ok(Metrics {
            rmse: mse.sqrt(),
            mse,
            n: pred.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    format: String,
    version: u32,
    pub params: HyperParams,
    pub schema: Schema,
    pub lin: LinearFeatureSet,
    pub n_train: usize,
    pub trees: Vec<TreeRecord>,
}

/// Rows drawn for one tree: the bootstrap multiset, and for honest trees its
/// split into structure rows and leaf rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSample {
    pub split_rows: Vec<usize>,
    pub agg_rows: Option<Vec<usize>>,
    pub split_set: Vec<usize>,
    pub agg_set: Vec<usize>,
}

pub fn tree_seed(master: u64, index: usize) -> u64 {
    seed::derive(master, index as u64)
}

/// Bootstrap of ⌈fraction·n⌉ rows with replacement. In honest mode the
/// distinct drawn rows are shuffled and the first ⌈splitratio·k⌉ of them (at
/// least one, at most k−1) form the split set; each role keeps its rows'
/// multiplicities.
pub fn draw_sample(n: usize, params: &HyperParams, tree_seed: u64) -> TreeSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(tree_seed, RESAMPLE_STREAM));
    let draws = ((params.sample_fraction * n as f64).ceil() as usize).clamp(1, n.max(1));
    let mut rows: Vec<usize> = (0..draws).map(|_| rng.random_range(0..n)).collect();
    rows.sort_unstable();
    if !params.honest {
        return TreeSample {
            split_rows: rows,
            agg_rows: None,
            split_set: Vec::new(),
            agg_set: Vec::new(),
        };
    }
    let mut distinct: Vec<usize> = rows.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    distinct.shuffle(&mut rng);
    let k = distinct.len();
    let n_split = if k < 2 {
        k
    } else {
        ((params.splitratio * k as f64).ceil() as usize).clamp(1, k - 1)
    };
    let mut split_set = distinct[..n_split].to_vec();
    let mut agg_set = distinct[n_split..].to_vec();
    split_set.sort_unstable();
    agg_set.sort_unstable();
    let (split_rows, agg_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|r| split_set.binary_search(r).is_ok());
    TreeSample {
        split_rows,
        agg_rows: Some(agg_rows),
        split_set,
        agg_set,
    }
}

struct Prepared {
    lin: LinearFeatureSet,
    tree_params: TreeParams,
    sampler: FeatureSampler,
    aug: AugmentedRows,
}

impl Forest {
    /// Trains on the global rayon pool.
    pub fn train(ds: &Dataset, params: &HyperParams) -> Result<Forest> {
        Self::train_with_threads(ds, params, None)
    }

    /// Trains with `threads` workers (`None`: the global pool). The result
    /// does not depend on the thread count.
    pub fn train_with_threads(ds: &Dataset, params: &HyperParams, threads: Option<usize>) -> Result<Forest> {
        let prep = Self::prepare(ds, params)?;
        let grow = || -> Vec<TreeRecord> {
            (0..params.ntree)
                .into_par_iter()
                .map(|t| Self::grow(ds, params, &prep, t))
                .collect()
        };
        let trees = match threads {
            Some(k) => rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?
                .install(grow),
            None => grow(),
        };
        Ok(Forest {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            params: params.clone(),
            schema: ds.schema(),
            lin: prep.lin,
            n_train: ds.n_rows(),
            trees,
        })
    }

    /// Grows only tree `index` of the forest `params` describes, exactly as
    /// [`Forest::train`] would.
    pub fn train_tree(ds: &Dataset, params: &HyperParams, index: usize) -> Result<TreeRecord> {
        let prep = Self::prepare(ds, params)?;
        Ok(Self::grow(ds, params, &prep, index))
    }

    fn prepare(ds: &Dataset, params: &HyperParams) -> Result<Prepared> {
        params.validate(ds.n_features())?;
        if ds.n_rows() < 2 * params.nodesize_spl {
            return Err(Error::Config(format!(
                "need at least 2*nodesize_spl = {} rows, got {}",
                2 * params.nodesize_spl,
                ds.n_rows()
            )));
        }
        let lin = params.linear_set(ds)?;
        let tree_params = TreeParams {
            cfg: SplitConfig::new(params.lambda, params.nodesize_spl, lin.clone()),
            stop: StoppingConfig {
                min_split_gain: params.min_split_gain,
                folds: params.folds,
                nodesize_spl: params.nodesize_spl,
            },
            seed: params.seed,
        };
        let sampler = FeatureSampler::new(ds.n_features(), params.resolved_mtry(ds.n_features()));
        let aug = AugmentedRows::new(ds, &lin);
        Ok(Prepared {
            lin,
            tree_params,
            sampler,
            aug,
        })
    }

    fn grow(ds: &Dataset, params: &HyperParams, prep: &Prepared, index: usize) -> TreeRecord {
        let seed = tree_seed(params.seed, index);
        let sample = draw_sample(ds.n_rows(), params, seed);
        let tp = TreeParams {
            seed,
            ..prep.tree_params.clone()
        };
        let root = build_tree_with(ds, &prep.aug, &sample.split_rows, sample.agg_rows.as_deref(), &tp, &prep.sampler);
        TreeRecord {
            seed,
            root,
            split_set: sample.split_set,
            agg_set: sample.agg_set,
        }
    }

    pub fn ntree(&self) -> usize {
        self.trees.len()
    }

    /// Per-tree predictions for an encoded row.
    pub fn tree_predictions(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| predict_tree(&t.root, x, &self.lin)).collect()
    }

    /// Mean of the tree predictions for one encoded row (schema order).
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| predict_tree(&t.root, x, &self.lin)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict_encoded(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        if let Some(bad) = rows.iter().find(|r| r.len() != self.schema.len()) {
            return Err(Error::Schema {
                column: format!("<row of width {}>", bad.len()),
                message: format!("expected {} features", self.schema.len()),
            });
        }
        Ok(rows.par_iter().map(|r| self.predict_row(r)).collect())
    }

    /// Predictions for every row of `ds`, matching columns by name.
    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let rows = self.schema.encode_dataset(ds)?;
        self.predict_encoded(&rows)
    }

    pub fn evaluate(&self, test: &Dataset) -> Result<Metrics> {
        if test.n_rows() == 0 {
            return Err(Error::EmptyTestSet);
        }
        let pred = self.predict_dataset(test)?;
        Metrics::from_predictions(&pred, test.response())
    }

    pub fn to_writer<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn from_reader<R: Read>(r: R) -> Result<Forest> {
        let value: serde_json::Value = serde_json::from_reader(r).map_err(|e| Error::Model(e.to_string()))?;
        match value.get("format").and_then(|v| v.as_str()) {
            Some(MODEL_FORMAT) => {}
            other => return Err(Error::Model(format!("not a linforest model (format {other:?})"))),
        }
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == MODEL_VERSION as u64 => {}
            other => return Err(Error::Model(format!("unsupported model version {other:?}"))),
        }
        let forest: Forest = serde_json::from_value(value).map_err(|e| Error::Model(e.to_string()))?;
        if forest.trees.is_empty() {
            return Err(Error::Model("model has no trees".into()));
        }
        Ok(forest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.to_writer(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Forest> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(file))
    }
}
