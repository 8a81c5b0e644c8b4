//! Slow reference implementations.
//!
//! Everything here refits ridge models from scratch with a dense solve. Nothing
//! is shared with the incremental split path beyond the dataset accessors and
//! the tie rule, so agreement between the two is meaningful.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{Column, ColumnData, Dataset, LinearFeatureSet};
use crate::ridge::LeafModel;
use crate::splitter::{midpoint, NoValidSplit, SplitCandidate, SplitConfig, SplitRule, Splitter, TIE_RTOL};

/// Ridge fit of `(z, y)` rows, where each `z` ends with the constant 1.
/// The last coordinate (intercept) is not penalized.
pub fn ridge_fit_direct(rows: &[(Vec<f64>, f64)], lambda: f64) -> LeafModel {
    assert!(!rows.is_empty(), "ridge fit needs at least one row");
    let dim = rows[0].0.len();
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut b = DVector::<f64>::zeros(dim);
    for (z, y) in rows {
        let zv = DVector::from_column_slice(z);
        a += &zv * zv.transpose();
        b += &zv * *y;
    }
    for i in 0..dim - 1 {
        a[(i, i)] += lambda;
    }
    let coef = a
        .clone()
        .cholesky()
        .map(|c| c.solve(&b))
        .or_else(|| a.lu().solve(&b))
        .expect("regularized system is nonsingular");
    LeafModel {
        beta: coef.as_slice()[..dim - 1].to_vec(),
        intercept: coef[dim - 1],
        lambda,
    }
}

/// In-sample Σ (y − ŷ)² of the ridge fit on `rows`.
pub fn ridge_rss_direct(rows: &[(Vec<f64>, f64)], lambda: f64) -> f64 {
    let m = ridge_fit_direct(rows, lambda);
    let d = m.beta.len();
    rows.iter()
        .map(|(z, y)| {
            let r = y - m.predict(&z[..d]);
            r * r
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCandidate {
    pub rule: SplitRule,
    pub left_count: usize,
    pub right_count: usize,
    /// True two-sided RSS.
    pub rss: f64,
}

/// Every admissible candidate with its refit RSS, and the index of the winner.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub feature: usize,
    pub candidates: Vec<OracleCandidate>,
    pub best: usize,
    /// Σy² over the searched rows.
    pub sum_y2: f64,
}

impl OracleReport {
    pub fn best_rss(&self) -> f64 {
        self.candidates[self.best].rss
    }

    pub fn rss(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.rss).collect()
    }

    /// The winning candidate in the splitter's result shape; `score` is RSS − Σy².
    pub fn chosen(&self) -> SplitCandidate {
        let c = &self.candidates[self.best];
        SplitCandidate {
            feature: self.feature,
            rule: c.rule,
            score: c.rss - self.sum_y2,
            left_count: c.left_count,
            right_count: c.right_count,
        }
    }
}

fn side(ds: &Dataset, rows: &[usize], lin: &LinearFeatureSet) -> Vec<(Vec<f64>, f64)> {
    rows.iter().map(|&r| (ds.linear_row(r, lin), ds.response()[r])).collect()
}

/// Exhaustive search: every admissible boundary (numeric) or level
/// (categorical) is scored by refitting both sides from scratch.
pub fn best_split_exhaustive(
    ds: &Dataset,
    rows: &[usize],
    feature: usize,
    cfg: &SplitConfig,
) -> Result<OracleReport, NoValidSplit> {
    let y = ds.response();
    let sum_y2 = rows.iter().map(|&r| y[r] * y[r]).sum::<f64>();
    let tol = TIE_RTOL * sum_y2;
    let min_child = cfg.min_child_size;
    let mut candidates = Vec::new();

    match &ds.column(feature).data {
        ColumnData::Numeric(values) => {
            let mut order = rows.to_vec();
            order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
            for k in 1..order.len() {
                let (lo, hi) = (values[order[k - 1]], values[order[k]]);
                if lo == hi || k < min_child || order.len() - k < min_child {
                    continue;
                }
                let left = side(ds, &order[..k], &cfg.lin);
                let right = side(ds, &order[k..], &cfg.lin);
                candidates.push(OracleCandidate {
                    rule: SplitRule::Numeric {
                        threshold: midpoint(lo, hi),
                    },
                    left_count: k,
                    right_count: order.len() - k,
                    rss: ridge_rss_direct(&left, cfg.lambda) + ridge_rss_direct(&right, cfg.lambda),
                });
            }
        }
        ColumnData::Categorical { codes, levels } => {
            for level in 0..levels.len() as u32 {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| codes[i] == level);
                if l.is_empty() || r.is_empty() || l.len() < min_child || r.len() < min_child {
                    continue;
                }
                candidates.push(OracleCandidate {
                    rule: SplitRule::Categorical { level },
                    left_count: l.len(),
                    right_count: r.len(),
                    rss: ridge_rss_direct(&side(ds, &l, &cfg.lin), cfg.lambda)
                        + ridge_rss_direct(&side(ds, &r, &cfg.lin), cfg.lambda),
                });
            }
        }
    }

    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if best.is_none_or(|b| c.rss < candidates[b].rss - tol) {
            best = Some(i);
        }
    }
    best.map(|best| OracleReport {
        feature,
        candidates,
        best,
        sum_y2,
    })
    .ok_or(NoValidSplit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Fast,
    Exhaustive,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Fast => "fast",
            Strategy::Exhaustive => "exhaustive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub strategy: Strategy,
    pub n: usize,
    pub d_lin: usize,
    pub seconds: f64,
    /// Threshold chosen by the timed search.
    pub threshold: f64,
}

/// Random instance for timing: `d_lin` standard-normal features, a noisy
/// piecewise-linear response, split on feature 0.
pub fn timing_instance(n: usize, d_lin: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<Vec<f64>> = (0..d_lin)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let y = (0..n)
        .map(|i| {
            let x0: f64 = cols[0][i];
            let lin: f64 = cols.iter().map(|c| c[i]).sum();
            (if x0 > 0.3 { 2.0 * lin } else { -lin }) + 0.5 * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let columns = cols
        .into_iter()
        .enumerate()
        .map(|(i, v)| Column::numeric(format!("X{}", i + 1), v))
        .collect();
    Dataset::new(columns, "y", y).expect("valid timing instance")
}

const MIN_SAMPLE: Duration = Duration::from_millis(20);

/// Median-of-5 wall time of one full split search on feature 0 per `n`.
/// Short searches are repeated within a sample and averaged. Samples are
/// interleaved across `ns` so background load drifts hit every size alike.
pub fn timing_probe(ns: &[usize], d_lin: usize, strategy: Strategy, seed: u64) -> Vec<TimingRow> {
    let setups: Vec<(Dataset, SplitConfig)> = ns
        .iter()
        .map(|&n| {
            let ds = timing_instance(n, d_lin, seed ^ n as u64);
            let lin = LinearFeatureSet::all_numeric(&ds).expect("numeric instance");
            (ds, SplitConfig::new(1.0, 1, lin))
        })
        .collect();
    let runs: Vec<Box<dyn Fn() -> f64 + '_>> = setups
        .iter()
        .map(|(ds, cfg)| {
            let splitter = Splitter::new(ds, cfg);
            let rows: Vec<usize> = (0..ds.n_rows()).collect();
            let run = move || -> f64 {
                let rule = match strategy {
                    Strategy::Fast => splitter.best_numeric(&rows, 0).expect("split exists").rule,
                    Strategy::Exhaustive => best_split_exhaustive(ds, &rows, 0, cfg).expect("split exists").chosen().rule,
                };
                match rule {
                    SplitRule::Numeric { threshold } => threshold,
                    SplitRule::Categorical { .. } => unreachable!(),
                }
            };
            Box::new(run) as Box<dyn Fn() -> f64 + '_>
        })
        .collect();

    // warmup, and calibrate the repetition count
    let mut thresholds = Vec::with_capacity(runs.len());
    let reps: Vec<usize> = runs
        .iter()
        .map(|run| {
            let start = Instant::now();
            thresholds.push(run());
            let once = start.elapsed();
            if once >= MIN_SAMPLE {
                1
            } else {
                (MIN_SAMPLE.as_secs_f64() / once.as_secs_f64().max(1e-9)).ceil() as usize
            }
        })
        .collect();

    let mut samples = vec![Vec::with_capacity(5); runs.len()];
    for _ in 0..5 {
        for (i, run) in runs.iter().enumerate() {
            let start = Instant::now();
            for _ in 0..reps[i] {
                std::hint::black_box(run());
            }
            samples[i].push(start.elapsed().as_secs_f64() / reps[i] as f64);
        }
    }
    ns.iter()
        .zip(samples)
        .zip(thresholds)
        .map(|((&n, mut s), threshold)| {
            s.sort_by(f64::total_cmp);
            TimingRow {
                strategy,
                n,
                d_lin,
                seconds: s[2],
                threshold,
            }
        })
        .collect()
}

/// Writes timing rows as CSV with columns strategy,n,d_lin,seconds.
pub fn write_timing_csv<W: std::io::Write>(rows: &[TimingRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "strategy,n,d_lin,seconds")?;
    for r in rows {
        writeln!(w, "{},{},{},{:.9}", r.strategy.name(), r.n, r.d_lin, r.seconds)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splitter::best_split_numeric;

    #[test]
    fn direct_fit_two_points() {
        let m = ridge_fit_direct(&[(vec![0.0, 1.0], 0.0), (vec![2.0, 1.0], 2.0)], 1.0);
        assert!((m.beta[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((m.intercept - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn direct_fit_heavy_shrinkage() {
        let rows: Vec<(Vec<f64>, f64)> = (0..10).map(|i| (vec![i as f64, 1.0], 3.0 * i as f64 + 1.0)).collect();
        let m = ridge_fit_direct(&rows, 1e12);
        assert!(m.beta[0].abs() < 1e-6);
        assert!((m.intercept - 14.5).abs() < 1e-4);
    }

    fn step_ds() -> Dataset {
        Dataset::new(vec![Column::numeric("x", vec![1.0, 2.0, 3.0, 4.0])], "y", vec![0.0, 0.0, 10.0, 10.0]).unwrap()
    }

    #[test]
    fn exhaustive_agrees_on_step_instance() {
        let ds = step_ds();
        let cfg = SplitConfig::new(1e-6, 1, LinearFeatureSet::new(vec![0], &ds).unwrap());
        let rows = [0, 1, 2, 3];
        let report = best_split_exhaustive(&ds, &rows, 0, &cfg).unwrap();
        assert_eq!(report.chosen().rule, SplitRule::Numeric { threshold: 2.5 });
        assert_eq!(report.best_rss(), report.rss().into_iter().fold(f64::INFINITY, f64::min));
        assert_eq!(best_split_numeric(&ds, &rows, 0, &cfg).unwrap().rule, report.chosen().rule);

        let (profile, _) = Splitter::new(&ds, &cfg).numeric_profile(&rows, 0);
        assert_eq!(profile.len(), report.candidates.len());
        for (p, o) in profile.iter().zip(&report.candidates) {
            let fast = p.score + 200.0;
            assert!((fast - o.rss).abs() <= 1e-9 * o.rss.max(1e-9), "{fast} vs {}", o.rss);
        }
    }

    #[test]
    fn constant_response_profile_is_flat() {
        let ds = Dataset::new(vec![Column::numeric("x", vec![1.0, 2.0, 3.0, 4.0, 5.0])], "y", vec![2.0; 5]).unwrap();
        let cfg = SplitConfig::new(1.0, 1, LinearFeatureSet::new(vec![0], &ds).unwrap());
        let report = best_split_exhaustive(&ds, &[0, 1, 2, 3, 4], 0, &cfg).unwrap();
        let rss = report.rss();
        assert!(rss.iter().all(|r| (r - rss[0]).abs() <= 1e-10));
        assert_eq!(report.best, 0);
    }

    #[test]
    fn probe_strategies_agree() {
        let fast = timing_probe(&[300], 2, Strategy::Fast, 1);
        let slow = timing_probe(&[300], 2, Strategy::Exhaustive, 1);
        assert_eq!(fast[0].threshold, slow[0].threshold);
        let mut buf = Vec::new();
        write_timing_csv(&fast, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("strategy,n,d_lin,seconds\nfast,300,2,"));
    }
}
