//! Ridge algebra for one side of a candidate split.
//!
//! For a set of observations H with augmented rows z = [x; 1] we keep
//!
//! * `g` = Σ z zᵀ (the unregularized Gram sum),
//! * `s` = Σ y z,
//! * `a_inv` = (g + λJ)⁻¹ where J is the identity with its intercept entry zeroed.
//!
//! The in-sample RSS of the ridge fit on H is `phi + Σ y²`, with
//! `phi = sᵀA⁻¹ g A⁻¹s − 2 sᵀA⁻¹s`. Since Σ y² over a node does not depend on
//! where the node is split, split search only needs `phi` of both sides.
//! Observations move between sides with rank-one (Sherman–Morrison) updates of
//! `a_inv`, costing O(d²) each.

use serde::{Deserialize, Serialize};

use crate::linalg;

/// Denominators of the rank-one update smaller than this trigger a direct re-inversion.
pub const SM_DENOMINATOR_GUARD: f64 = 1e-12;

/// Default number of rank-one updates between full re-inversions.
pub const DEFAULT_REFRESH_INTERVAL: usize = 4096;

/// Running ridge sums and inverse for one side of a split.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeComponents {
    dim: usize,
    a_inv: Vec<f64>,
    s: Vec<f64>,
    g: Vec<f64>,
    count: usize,
    lambda: f64,
    refresh_interval: Option<usize>,
    since_refresh: usize,
    direct_inversions: usize,
    scratch: Vec<f64>,
}

impl RidgeComponents {
    /// Builds the components of `rows` (augmented vectors with trailing 1, and responses)
    /// by direct summation and inversion.
    ///
    /// Panics when `rows` is empty or `lambda` is not positive.
    pub fn from_rows<'a, I>(rows: I, lambda: f64) -> Self
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        let mut rows = rows.into_iter().peekable();
        let dim = rows.peek().expect("ridge components need at least one row").0.len();
        let mut g = vec![0.0; dim * dim];
        let mut s = vec![0.0; dim];
        let mut count = 0;
        for (z, y) in rows {
            debug_assert_eq!(z.len(), dim);
            linalg::add_outer(&mut g, z, 1.0);
            for (si, zi) in s.iter_mut().zip(z) {
                *si += y * zi;
            }
            count += 1;
        }
        Self::from_sums(g, s, count, lambda)
    }

    /// Builds components from precomputed sums, inverting `g + λJ` directly.
    ///
    /// Panics when `count` is zero or `lambda` is not positive.
    pub fn from_sums(g: Vec<f64>, s: Vec<f64>, count: usize, lambda: f64) -> Self {
        assert!(count >= 1, "ridge components need at least one row");
        assert!(lambda > 0.0, "ridge penalty must be positive, got {lambda}");
        let dim = s.len();
        assert_eq!(g.len(), dim * dim);
        let mut c = RidgeComponents {
            dim,
            a_inv: Vec::new(),
            s,
            g,
            count,
            lambda,
            refresh_interval: Some(DEFAULT_REFRESH_INTERVAL),
            since_refresh: 0,
            direct_inversions: 0,
            scratch: vec![0.0; dim],
        };
        c.recompute_inverse();
        c.direct_inversions = 0;
        c
    }

    /// Sets how many rank-one updates may run before `a_inv` is re-inverted from
    /// `g`. `None` disables periodic refreshes.
    pub fn with_refresh_interval(mut self, interval: Option<usize>) -> Self {
        self.refresh_interval = interval;
        self
    }

    /// g + λJ.
    pub fn regularized_gram(&self) -> Vec<f64> {
        let mut a = self.g.clone();
        for i in 0..self.dim - 1 {
            a[i * self.dim + i] += self.lambda;
        }
        a
    }

    /// Re-inverts `g + λJ` directly.
    pub fn recompute_inverse(&mut self) {
        self.a_inv = linalg::invert(&self.regularized_gram(), self.dim)
            .expect("regularized Gram matrix is positive definite for lambda > 0 and count >= 1");
        self.since_refresh = 0;
        self.direct_inversions += 1;
    }

    /// Moves an observation into this side.
    pub fn add_observation(&mut self, z: &[f64], y: f64) {
        self.update(z, y, 1.0);
    }

    /// Moves an observation out of this side. Panics if that would leave it empty.
    pub fn remove_observation(&mut self, z: &[f64], y: f64) {
        assert!(self.count >= 2, "cannot remove the last observation of a side");
        self.update(z, y, -1.0);
    }

    fn update(&mut self, z: &[f64], y: f64, sign: f64) {
        debug_assert_eq!(z.len(), self.dim);
        for (si, zi) in self.s.iter_mut().zip(z) {
            *si += sign * y * zi;
        }
        linalg::add_outer(&mut self.g, z, sign);
        if sign > 0.0 {
            self.count += 1;
        } else {
            self.count -= 1;
        }

        linalg::matvec(&self.a_inv, z, &mut self.scratch);
        let denom = 1.0 + sign * linalg::dot(z, &self.scratch);
        self.since_refresh += 1;
        let refresh_due = self.refresh_interval.is_some_and(|k| self.since_refresh >= k);
        if denom.abs() < SM_DENOMINATOR_GUARD || refresh_due {
            self.recompute_inverse();
        } else {
            let u = std::mem::take(&mut self.scratch);
            linalg::add_outer(&mut self.a_inv, &u, -sign / denom);
            self.scratch = u;
        }
    }

    /// RSS of the ridge fit on this side, minus Σ y².
    pub fn phi(&self) -> f64 {
        const STACK: usize = 32;
        let d = self.dim;
        if d <= STACK {
            let mut buf = [0.0; 2 * STACK];
            let (w, gw) = buf.split_at_mut(STACK);
            self.phi_with(&mut w[..d], &mut gw[..d])
        } else {
            self.phi_with(&mut vec![0.0; d], &mut vec![0.0; d])
        }
    }

    fn phi_with(&self, w: &mut [f64], gw: &mut [f64]) -> f64 {
        linalg::matvec(&self.a_inv, &self.s, w);
        linalg::matvec(&self.g, w, gw);
        linalg::dot(w, gw) - 2.0 * linalg::dot(&self.s, w)
    }

    /// Ridge coefficients a_inv · s, split into slopes and intercept.
    pub fn solve_leaf(&self) -> LeafModel {
        let mut coef = vec![0.0; self.dim];
        linalg::matvec(&self.a_inv, &self.s, &mut coef);
        let intercept = coef.pop().expect("dim >= 1");
        LeafModel {
            beta: coef,
            intercept,
            lambda: self.lambda,
        }
    }

    pub fn a_inv(&self) -> &[f64] {
        &self.a_inv
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Length of the augmented vectors (linear features + 1).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of direct re-inversions since construction (guard or periodic refresh).
    pub fn direct_inversions(&self) -> usize {
        self.direct_inversions
    }

    /// max-abs of a_inv · (g + λJ) − I.
    pub fn inverse_residual(&self) -> f64 {
        let prod = linalg::matmul(&self.a_inv, &self.regularized_gram(), self.dim);
        linalg::max_abs_diff(&prod, &linalg::identity(self.dim))
    }
}

/// Split objective of a two-sided partition: phi(left) + phi(right).
pub fn rss_pair(left: &RidgeComponents, right: &RidgeComponents) -> f64 {
    left.phi() + right.phi()
}

/// Fitted ridge model of one leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafModel {
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

impl LeafModel {
    /// βᵀx + c for the linear-feature subvector `x`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.beta.len());
        linalg::dot(&self.beta, x) + self.intercept
    }

    pub fn is_finite(&self) -> bool {
        self.intercept.is_finite() && self.beta.iter().all(|b| b.is_finite())
    }
}
