//! Small dense solves for the surrogate fits (LIME, KernelSHAP, plane fits).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Solves `a · x = b` for square row-major `a` by Gaussian elimination with
/// partial pivoting.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n * n {
        return Err(Error::config("solve: matrix is not square"));
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
    let tol = scale * 1e-13 * n as f64;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                libm::fabs(a[i * n + col])
                    .partial_cmp(&libm::fabs(a[j * n + col]))
                    .unwrap_or(core::cmp::Ordering::Equal)
            })
            .expect("non-empty range");
        if !(libm::fabs(a[pivot * n + col]) > tol) {
            return Err(Error::Singular);
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row * n + row];
    }
    Ok(x)
}

/// Weighted ridge least squares: minimizes
/// `Σ w_i (y_i − design_i · β)² + Σ_j penalty_j β_j²`.
///
/// `design` is row-major with `p` columns.
pub fn weighted_least_squares(
    design: &[f64],
    p: usize,
    y: &[f64],
    weights: &[f64],
    penalty: &[f64],
) -> Result<Vec<f64>> {
    let n = y.len();
    if design.len() != n * p || weights.len() != n || penalty.len() != p {
        return Err(Error::config("weighted_least_squares: inconsistent sizes"));
    }
    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    for i in 0..n {
        let row = &design[i * p..(i + 1) * p];
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        for a in 0..p {
            let wa = w * row[a];
            rhs[a] += wa * y[i];
            for b in a..p {
                gram[a * p + b] += wa * row[b];
            }
        }
    }
    for a in 0..p {
        gram[a * p + a] += penalty[a];
        for b in 0..a {
            gram[a * p + b] = gram[b * p + a];
        }
    }
    solve(gram, rhs)
}
