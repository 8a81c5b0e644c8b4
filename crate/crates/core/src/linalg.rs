//! Small dense row-major matrix helpers for the (d+1)×(d+1) systems in leaf models.

/// Inverts a symmetric row-major matrix by Gauss-Jordan elimination with
/// partial pivoting; the result is re-symmetrized. Returns `None` for a
/// singular or non-finite input.
pub(crate) fn invert(m: &[f64], dim: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(m.len(), dim * dim);
    let mut a = m.to_vec();
    let mut inv = identity(dim);
    for col in 0..dim {
        let pivot_row = (col..dim).max_by(|&i, &j| a[i * dim + col].abs().total_cmp(&a[j * dim + col].abs()))?;
        let pivot = a[pivot_row * dim + col];
        if pivot == 0.0 || !pivot.is_finite() {
            return None;
        }
        if pivot_row != col {
            for k in 0..dim {
                a.swap(col * dim + k, pivot_row * dim + k);
                inv.swap(col * dim + k, pivot_row * dim + k);
            }
        }
        let scale = 1.0 / pivot;
        for k in 0..dim {
            a[col * dim + k] *= scale;
            inv[col * dim + k] *= scale;
        }
        for row in 0..dim {
            if row == col {
                continue;
            }
            let factor = a[row * dim + col];
            if factor == 0.0 {
                continue;
            }
            for k in 0..dim {
                a[row * dim + k] -= factor * a[col * dim + k];
                inv[row * dim + k] -= factor * inv[col * dim + k];
            }
        }
    }
    if inv.iter().all(|v| v.is_finite()) {
        symmetrize(&mut inv, dim);
        Some(inv)
    } else {
        None
    }
}

pub(crate) fn identity(dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim * dim];
    for i in 0..dim {
        m[i * dim + i] = 1.0;
    }
    m
}

/// Replaces `m` by (m + mᵀ)/2.
pub(crate) fn symmetrize(m: &mut [f64], dim: usize) {
    for i in 0..dim {
        for j in (i + 1)..dim {
            let v = 0.5 * (m[i * dim + j] + m[j * dim + i]);
            m[i * dim + j] = v;
            m[j * dim + i] = v;
        }
    }
}

pub(crate) fn matvec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let dim = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&m[i * dim..(i + 1) * dim], v);
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// m += w · v vᵀ, writing both triangles from the upper one.
#[inline]
pub(crate) fn add_outer(m: &mut [f64], v: &[f64], w: f64) {
    let dim = v.len();
    for i in 0..dim {
        let wi = w * v[i];
        for j in i..dim {
            let x = m[i * dim + j] + wi * v[j];
            m[i * dim + j] = x;
            m[j * dim + i] = x;
        }
    }
}

pub(crate) fn matmul(a: &[f64], b: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim * dim];
    for i in 0..dim {
        for k in 0..dim {
            let aik = a[i * dim + k];
            for j in 0..dim {
                out[i * dim + j] += aik * b[k * dim + j];
            }
        }
    }
    out
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_two_by_two() {
        let inv = invert(&[2.0, 1.0, 1.0, 1.0], 2).unwrap();
        assert!(max_abs_diff(&inv, &[1.0, -1.0, -1.0, 2.0]) < 1e-15);
    }

    #[test]
    fn singular_is_none() {
        assert!(invert(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
        assert!(invert(&[0.0; 4], 2).is_none());
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let m = [0.0, 1.0, 1.0, 0.0];
        let inv = invert(&m, 2).unwrap();
        assert!(max_abs_diff(&matmul(&m, &inv, 2), &identity(2)) < 1e-15);
    }
}
