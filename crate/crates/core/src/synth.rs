//! Synthetic regression surfaces: a sparse linear surface, a random step
//! surface, and a mixture of the two gated on the first feature.
//!
//! Every generator draws ten independent standard-normal features named
//! `X1`..`X10` and a response named `y`.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Column, Dataset};
use crate::seed;

pub const N_FEATURES: usize = 10;
pub const RESPONSE: &str = "y";

/// Nonzero coefficients of the linear surface as (0-based column, weight).
pub const LINEAR_COEFFS: [(usize, f64); 5] = [(1, -0.47), (2, -0.98), (3, -0.87), (7, 0.63), (9, -0.64)];

pub const LINEAR_NOISE_SD: f64 = 2.0;
pub const STEP_NOISE_SD: f64 = 1.0;
/// Rows with `X1` below this follow the linear surface in the mixed design.
pub const MIXED_GATE: f64 = 0.5;

const TEST_STREAM: u64 = 0x7e57;

pub fn f_linear(x: &[f64]) -> f64 {
    LINEAR_COEFFS.iter().map(|&(j, c)| c * x[j]).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum StepNode {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<StepNode>,
        right: Box<StepNode>,
    },
}

/// Piecewise-constant surface: a tree with random splits grown until every
/// leaf holds a single anchor point, predicting that anchor's level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    root: StepNode,
    levels: Vec<f64>,
}

impl StepFunction {
    /// Grows the purity tree over `anchors` (rows of features) with one level each.
    pub fn fit(anchors: &[Vec<f64>], levels: &[f64], rng: &mut ChaCha8Rng) -> Self {
        assert!(!anchors.is_empty() && anchors.len() == levels.len());
        let idx: Vec<usize> = (0..anchors.len()).collect();
        StepFunction {
            root: grow_pure(anchors, levels, idx, rng),
            levels: levels.to_vec(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                StepNode::Leaf(v) => return *v,
                StepNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] < *threshold { left } else { right },
            }
        }
    }

    /// Anchor levels, one per piece.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn leaf_count(&self) -> usize {
        fn count(n: &StepNode) -> usize {
            match n {
                StepNode::Leaf(_) => 1,
                StepNode::Split { left, right, .. } => count(left) + count(right),
            }
        }
        count(&self.root)
    }
}

fn grow_pure(anchors: &[Vec<f64>], levels: &[f64], idx: Vec<usize>, rng: &mut ChaCha8Rng) -> StepNode {
    if idx.len() == 1 {
        return StepNode::Leaf(levels[idx[0]]);
    }
    let d = anchors[idx[0]].len();
    // features on which the anchors still differ
    let splittable: Vec<usize> = (0..d)
        .filter(|&f| idx.iter().any(|&i| anchors[i][f] != anchors[idx[0]][f]))
        .collect();
    if splittable.is_empty() {
        // identical anchors: nothing separates them, keep the first level
        return StepNode::Leaf(levels[idx[0]]);
    }
    let feature = splittable[rng.random_range(0..splittable.len())];
    let lo = idx.iter().map(|&i| anchors[i][feature]).fold(f64::INFINITY, f64::min);
    let hi = idx.iter().map(|&i| anchors[i][feature]).fold(f64::NEG_INFINITY, f64::max);
    let (threshold, left, right) = loop {
        let t = rng.random_range(lo..hi);
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| anchors[i][feature] < t);
        if !l.is_empty() && !r.is_empty() {
            break (t, l, r);
        }
    };
    StepNode::Split {
        feature,
        threshold,
        left: Box::new(grow_pure(anchors, levels, left, rng)),
        right: Box::new(grow_pure(anchors, levels, right, rng)),
    }
}

/// Noise-free response function of a generated design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Surface {
    Linear,
    Step { step: StepFunction },
    Mixed { step: StepFunction },
}

impl Surface {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Surface::Linear => f_linear(x),
            Surface::Step { step } => step.eval(x),
            Surface::Mixed { step } => {
                if x[0] < MIXED_GATE {
                    f_linear(x)
                } else {
                    step.eval(x)
                }
            }
        }
    }

    pub fn noise_sd(&self) -> f64 {
        match self {
            Surface::Linear => LINEAR_NOISE_SD,
            Surface::Step { .. } | Surface::Mixed { .. } => STEP_NOISE_SD,
        }
    }

    /// Draws `n` fresh rows from this surface.
    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = draw_features(n, &mut rng);
        self.respond(x, &mut rng)
    }

    fn respond(&self, x: Vec<Vec<f64>>, rng: &mut ChaCha8Rng) -> Dataset {
        let noise = Normal::new(0.0, self.noise_sd()).expect("positive sd");
        let y: Vec<f64> = x.iter().map(|row| self.eval(row) + rng.sample(noise)).collect();
        to_dataset(&x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthKind {
    Linear,
    Step { levels: usize },
    Mixed { levels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n: usize,
    pub seed: u64,
}

fn draw_features(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..N_FEATURES).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

fn to_dataset(x: &[Vec<f64>], y: Vec<f64>) -> Dataset {
    let columns = (0..N_FEATURES)
        .map(|j| Column::numeric(format!("X{}", j + 1), x.iter().map(|r| r[j]).collect()))
        .collect();
    Dataset::new(columns, RESPONSE, y).expect("generated data is well formed")
}

/// Levels drawn uniformly in [-10, 10) at `levels` rows sampled without
/// replacement from `x`, then separated by a random purity tree.
fn step_from(x: &[Vec<f64>], levels: usize, rng: &mut ChaCha8Rng) -> StepFunction {
    assert!(levels >= 1 && levels <= x.len(), "levels must be in [1, n]");
    let values: Vec<f64> = (0..levels).map(|_| rng.random_range(-10.0..10.0)).collect();
    let anchors: Vec<Vec<f64>> = index::sample(rng, x.len(), levels).into_iter().map(|i| x[i].clone()).collect();
    StepFunction::fit(&anchors, &values, rng)
}

/// Builds the surface for `spec` and draws its `spec.n` training rows.
pub fn generate(spec: &SynthSpec) -> (Dataset, Surface) {
    assert!(spec.n >= 1, "n must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x = draw_features(spec.n, &mut rng);
    let surface = match spec.kind {
        SynthKind::Linear => Surface::Linear,
        SynthKind::Step { levels } => Surface::Step {
            step: step_from(&x, levels, &mut rng),
        },
        SynthKind::Mixed { levels } => Surface::Mixed {
            step: step_from(&x, levels, &mut rng),
        },
    };
    let ds = surface.respond(x, &mut rng);
    (ds, surface)
}

pub fn gen_linear(n: usize, seed: u64) -> Dataset {
    generate(&SynthSpec {
        kind: SynthKind::Linear,
        n,
        seed,
    })
    .0
}

pub fn gen_step(n: usize, levels: usize, seed: u64) -> (Dataset, StepFunction) {
    match generate(&SynthSpec {
        kind: SynthKind::Step { levels },
        n,
        seed,
    }) {
        (ds, Surface::Step { step }) => (ds, step),
        _ => unreachable!(),
    }
}

pub fn gen_mixed(n: usize, levels: usize, seed: u64) -> (Dataset, StepFunction) {
    match generate(&SynthSpec {
        kind: SynthKind::Mixed { levels },
        n,
        seed,
    }) {
        (ds, Surface::Mixed { step }) => (ds, step),
        _ => unreachable!(),
    }
}

/// Training rows plus `n_test` test rows drawn from the same surface under a
/// seed derived from `spec.seed`.
pub fn gen_train_test(spec: &SynthSpec, n_test: usize) -> (Dataset, Dataset) {
    let (train, test, _) = gen_train_test_surface(spec, n_test);
    (train, test)
}

/// [`gen_train_test`] that also hands back the shared surface.
pub fn gen_train_test_surface(spec: &SynthSpec, n_test: usize) -> (Dataset, Dataset, Surface) {
    let (train, surface) = generate(spec);
    let test = surface.sample(n_test, seed::derive(spec.seed, TEST_STREAM));
    (train, test, surface)
}
