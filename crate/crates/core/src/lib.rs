//! Regression trees and random forests with ridge-regularized linear leaves.
//!
//! The split search sweeps each sorted feature once, maintaining the inverse
//! regularized Gram matrix of both sides with rank-one updates, so a node
//! costs O(n log n + n d²) instead of a refit per candidate threshold.

pub mod dataset;
pub mod dot;
pub mod error;
pub mod forest;
mod linalg;
pub mod oracle;
pub mod presets;
pub mod ridge;
pub mod seed;
pub mod splitter;
pub mod synth;
pub mod tree;

pub use dataset::{Column, ColumnData, Dataset, FeatureKind, FeatureSpec, LinearFeatureSet, Schema};
pub use error::{Error, Result};
pub use forest::{Forest, HyperParams, Metrics};
pub use ridge::{LeafModel, RidgeComponents};
pub use splitter::{NoValidSplit, SplitCandidate, SplitConfig, SplitRule};
pub use tree::{StoppingConfig, TreeNode, TreeParams};
