//! Magnitude ranking.
//!
//! Rank 1 is the entry with the largest magnitude. [`hard_rank`] is exact
//! and gives tied magnitudes the mean of the ranks they span. [`soft_rank`]
//! is a differentiable surrogate built from the Euclidean projection onto
//! the permutahedron, solved with pool-adjacent-violators isotonic
//! regression.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::autodiff::{Op, Var};
use crate::error::{Error, Result};

/// Exact magnitude ranks with averaged ties.
pub fn hard_rank(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mags: Vec<f64> = v.iter().map(|x| libm::fabs(*x)).collect();
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| {
        mags[b]
            .partial_cmp(&mags[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && mags[order[j]] == mags[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    Ok(ranks)
}

/// Sort order and isotonic blocks of one projected row, kept for the
/// backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct RowPartition {
    /// Indices of the row sorted by decreasing value.
    order: Vec<usize>,
    /// Exclusive end of each block, in sorted coordinates.
    block_ends: Vec<usize>,
}

impl RowPartition {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Replaces each entry by the mean over its block.
    pub fn block_average(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; row.len()];
        let mut start = 0;
        for &end in &self.block_ends {
            let members = &self.order[start..end];
            let mean = members.iter().map(|&i| row[i]).sum::<f64>() / members.len() as f64;
            for &i in members {
                out[i] = mean;
            }
            start = end;
        }
        out
    }
}

/// Decreasing isotonic regression of `y` by pool-adjacent-violators.
/// Returns the fitted values and the exclusive end of each pooled block.
fn isotonic_decreasing(y: &[f64]) -> (Vec<f64>, Vec<usize>) {
    // (sum, count) per block
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, c1) = blocks[blocks.len() - 1];
            let (s0, c0) = blocks[blocks.len() - 2];
            if s0 / c0 as f64 >= s1 / c1 as f64 {
                break;
            }
            blocks.pop();
            let last = blocks.len() - 1;
            blocks[last] = (s0 + s1, c0 + c1);
        }
    }
    let mut fitted = Vec::with_capacity(y.len());
    let mut ends = Vec::with_capacity(blocks.len());
    for (s, c) in blocks {
        let mean = s / c as f64;
        fitted.extend(core::iter::repeat_n(mean, c));
        ends.push(fitted.len());
    }
    (fitted, ends)
}

/// Euclidean projection of `z` onto the permutahedron generated by
/// `(n, n-1, …, 1)`: the largest entry of `z` maps near `n`.
pub fn project_permutahedron(z: &[f64]) -> (Vec<f64>, RowPartition) {
    let n = z.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z[b].partial_cmp(&z[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| z[i]).collect();
    let shifted: Vec<f64> = sorted
        .iter()
        .enumerate()
        .map(|(i, &s)| s - (n - i) as f64)
        .collect();
    let (dual, block_ends) = isotonic_decreasing(&shifted);
    let mut out = vec![0.0; n];
    for (pos, &idx) in order.iter().enumerate() {
        out[idx] = sorted[pos] - dual[pos];
    }
    (out, RowPartition { order, block_ends })
}

/// Differentiable magnitude ranks of a plain vector.
///
/// Smaller `regularization` tracks [`hard_rank`] more closely.
pub fn soft_rank(v: &[f64], regularization: f64) -> Result<Vec<f64>> {
    check_regularization(regularization)?;
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = v.len() as f64;
    let z: Vec<f64> = v.iter().map(|x| libm::fabs(*x) / regularization).collect();
    let (ascending, _) = project_permutahedron(&z);
    Ok(ascending.into_iter().map(|r| (n + 1.0) - r).collect())
}

/// Row-wise [`soft_rank`] on the graph. Gradients flow through both the
/// absolute value and the projection.
pub fn soft_rank_rows<'g>(v: Var<'g>, regularization: f64) -> Result<Var<'g>> {
    check_regularization(regularization)?;
    let n = v.shape().cols;
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let z = v.abs().scale(1.0 / regularization);
    let ascending = v
        .graph()
        .apply(Op::PermutahedronProjection(Vec::new().into()), &[z])?;
    Ok(ascending.neg().offset(n as f64 + 1.0))
}

fn check_regularization(regularization: f64) -> Result<()> {
    if regularization > 0.0 && regularization.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidRegularization(regularization))
    }
}
