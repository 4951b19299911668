//! Reverse sweep and the vector-Jacobian rules.

use alloc::vec;
use alloc::vec::Vec;

use super::{Graph, NodeId, Op, Var};
use crate::error::Result;
use crate::tensor::Tensor;

pub(super) fn run<'g>(g: &'g Graph, out: NodeId, wrt: &[Var<'g>]) -> Result<Vec<Var<'g>>> {
    let zeros = |v: &Var<'g>| {
        let s = v.shape();
        g.leaf(Tensor::zeros(s.rows, s.cols))
    };
    let lo = match wrt.iter().map(|v| v.id.0).filter(|&i| i <= out.0).min() {
        Some(lo) => lo,
        None => return Ok(wrt.iter().map(zeros).collect()),
    };
    let span = out.0 - lo + 1;

    // nodes in [lo, out] that depend on some wrt tensor
    let mut needs = vec![false; span];
    for v in wrt {
        if v.id.0 <= out.0 {
            needs[v.id.0 - lo] = true;
        }
    }
    {
        let nodes = g.nodes.borrow();
        for i in lo..=out.0 {
            if !needs[i - lo] {
                needs[i - lo] = nodes[i].parents.iter().any(|p| p.0 >= lo && needs[p.0 - lo]);
            }
        }
    }

    let mut grads: Vec<Option<Var<'g>>> = vec![None; span];
    if needs[span - 1] {
        grads[span - 1] = Some(g.scalar(1.0));
    }
    for i in (lo..=out.0).rev() {
        if !needs[i - lo] {
            continue;
        }
        let Some(cot) = grads[i - lo] else { continue };
        let (op, parents) = {
            let nodes = g.nodes.borrow();
            (nodes[i].op.clone(), nodes[i].parents.clone())
        };
        if parents.is_empty() {
            continue;
        }
        let mask: Vec<bool> = parents.iter().map(|p| p.0 >= lo && needs[p.0 - lo]).collect();
        let contributions = vjp(g, &op, &parents, NodeId(i), cot, &mask)?;
        for ((p, c), wanted) in parents.iter().zip(contributions).zip(&mask) {
            let Some(c) = c else { continue };
            if !wanted {
                continue;
            }
            let slot = &mut grads[p.0 - lo];
            *slot = Some(match *slot {
                Some(acc) => acc.add(c)?,
                None => c,
            });
        }
    }

    Ok(wrt
        .iter()
        .map(|v| {
            if v.id.0 <= out.0 {
                grads[v.id.0 - lo].unwrap_or_else(|| zeros(v))
            } else {
                zeros(v)
            }
        })
        .collect())
}

/// Cotangent contributions for each parent of `node`, given the node's
/// cotangent `cot`. Entries for parents with `mask[i] == false` may be `None`.
fn vjp<'g>(
    g: &'g Graph,
    op: &Op,
    parents: &[NodeId],
    node: NodeId,
    cot: Var<'g>,
    mask: &[bool],
) -> Result<Vec<Option<Var<'g>>>> {
    let p = |i: usize| g.var(parents[i]);
    let out = g.var(node);
    let want = |i: usize| mask.get(i).copied().unwrap_or(false);
    let one = |v: Var<'g>| Ok(vec![Some(v)]);

    match op {
        Op::Leaf => Ok(Vec::new()),
        Op::Add => Ok(vec![Some(cot), Some(cot)]),
        Op::Sub => Ok(vec![Some(cot), want(1).then(|| cot.neg())]),
        Op::Mul => Ok(vec![
            if want(0) { Some(cot.mul(p(1))?) } else { None },
            if want(1) { Some(cot.mul(p(0))?) } else { None },
        ]),
        Op::Div => Ok(vec![
            if want(0) { Some(cot.div(p(1))?) } else { None },
            if want(1) {
                Some(cot.mul(out)?.div(p(1))?.neg())
            } else {
                None
            },
        ]),
        Op::Neg => one(cot.neg()),
        Op::Scale(c) => one(cot.scale(*c)),
        Op::Offset(_) => one(cot),
        Op::MatMul => Ok(vec![
            if want(0) {
                Some(cot.matmul(p(1).t())?)
            } else {
                None
            },
            if want(1) {
                Some(p(0).t().matmul(cot)?)
            } else {
                None
            },
        ]),
        Op::Transpose => one(cot.t()),
        Op::Relu => {
            // subgradient 0 at the kink; the mask is constant so the second
            // derivative is 0 almost everywhere
            let mask = p(0).value().map(|v| if v > 0.0 { 1.0 } else { 0.0 });
            one(cot.mul(g.leaf(mask))?)
        }
        Op::Exp => one(cot.mul(out)?),
        Op::Log => one(cot.div(p(0))?),
        Op::Abs => {
            let sign = p(0).value().map(|v| {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            });
            one(cot.mul(g.leaf(sign))?)
        }
        Op::Sqrt => one(cot.div(out)?.scale(0.5)),
        Op::Powf(e) => one(cot.mul(p(0).powf(e - 1.0))?.scale(*e)),
        Op::BroadcastTo(_) => one(cot.sum_to(p(0).shape())?),
        Op::SumTo(_) => one(cot.broadcast_to(p(0).shape())?),
        Op::GatherCols(index) => {
            let cols = p(0).shape().cols;
            one(g.apply(
                Op::ScatterCols {
                    index: index.clone(),
                    cols,
                },
                &[cot],
            )?)
        }
        Op::ScatterCols { index, .. } => one(g.apply(Op::GatherCols(index.clone()), &[cot])?),
        Op::ConcatRows => {
            let mut start = 0;
            let mut grads = Vec::with_capacity(parents.len());
            for i in 0..parents.len() {
                let len = p(i).shape().rows;
                grads.push(if want(i) {
                    Some(cot.slice_rows(start, len)?)
                } else {
                    None
                });
                start += len;
            }
            Ok(grads)
        }
        Op::SliceRows { start, .. } => {
            let total = p(0).shape().rows;
            one(g.apply(Op::PadRows { start: *start, total }, &[cot])?)
        }
        Op::PadRows { start, .. } => one(cot.slice_rows(*start, p(0).shape().rows)?),
        Op::LogSoftmax => {
            let softmax = out.exp();
            let row_sums = cot.sum_cols();
            one(cot.sub(softmax.mul(row_sums)?)?)
        }
        Op::PermutahedronProjection(parts) => {
            let avg = g.apply(Op::BlockAverage(parts.clone()), &[cot])?;
            one(cot.sub(avg)?)
        }
        // symmetric linear map: its own adjoint
        Op::BlockAverage(parts) => one(g.apply(Op::BlockAverage(parts.clone()), &[cot])?),
    }
}
