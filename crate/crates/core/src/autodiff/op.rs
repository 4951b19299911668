//! Primitive operations and their forward kernels.

use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rank::{self, RowPartition};
use crate::tensor::{Shape, Tensor};

/// The primitive set. Each variant has a forward kernel here and a
/// vector-Jacobian rule in `backward.rs` written in terms of other primitives.
#[derive(Clone, Debug)]
pub enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale(f64),
    Offset(f64),
    MatMul,
    Transpose,
    Relu,
    Exp,
    Log,
    Abs,
    Sqrt,
    Powf(f64),
    BroadcastTo(Shape),
    SumTo(Shape),
    /// Picks one column per row, giving a `rows×1` result.
    GatherCols(Rc<[usize]>),
    /// Inverse placement of `GatherCols`: a `rows×1` input spread into `rows×cols`.
    ScatterCols {
        index: Rc<[usize]>,
        cols: usize,
    },
    ConcatRows,
    SliceRows {
        start: usize,
        len: usize,
    },
    PadRows {
        start: usize,
        total: usize,
    },
    LogSoftmax,
    /// Row-wise Euclidean projection onto the permutahedron of `(n, n-1, …, 1)`.
    /// The partition is computed by the forward pass.
    PermutahedronProjection(Rc<[RowPartition]>),
    /// Row-wise averaging within the isotonic blocks of a saved partition.
    BlockAverage(Rc<[RowPartition]>),
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Neg => "neg",
            Op::Scale(_) => "scale",
            Op::Offset(_) => "offset",
            Op::MatMul => "matmul",
            Op::Transpose => "transpose",
            Op::Relu => "relu",
            Op::Exp => "exp",
            Op::Log => "log",
            Op::Abs => "abs",
            Op::Sqrt => "sqrt",
            Op::Powf(_) => "power",
            Op::BroadcastTo(_) => "broadcast",
            Op::SumTo(_) => "sum",
            Op::GatherCols(_) => "gather",
            Op::ScatterCols { .. } => "scatter",
            Op::ConcatRows => "concat",
            Op::SliceRows { .. } => "slice",
            Op::PadRows { .. } => "pad",
            Op::LogSoftmax => "log_softmax",
            Op::PermutahedronProjection(_) => "permutahedron_projection",
            Op::BlockAverage(_) => "block_average",
        }
    }
}

fn mismatch(op: &Op, left: Shape, right: Shape) -> Error {
    Error::ShapeMismatch {
        op: op.name(),
        left,
        right,
    }
}

fn unary(x: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    x.map(f)
}

fn binary(op: &Op, a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(mismatch(op, a.shape(), b.shape()));
    }
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_shape(a.shape(), data)
}

/// Computes the value of `op` applied to `inputs`.
///
/// For ops whose saved state depends on the forward values (the
/// permutahedron projection) the returned `Op` carries that state;
/// otherwise it is the op passed in.
pub fn forward(op: Op, inputs: &[&Tensor]) -> Result<(Op, Tensor)> {
    let arity_ok = match &op {
        Op::Leaf => inputs.is_empty(),
        Op::Add | Op::Sub | Op::Mul | Op::Div | Op::MatMul => inputs.len() == 2,
        Op::ConcatRows => !inputs.is_empty(),
        _ => inputs.len() == 1,
    };
    if !arity_ok {
        return Err(Error::config("wrong number of operands"));
    }
    let out = match &op {
        Op::Leaf => unreachable!("leaves are created directly"),
        Op::Add => binary(&op, inputs[0], inputs[1], |a, b| a + b)?,
        Op::Sub => binary(&op, inputs[0], inputs[1], |a, b| a - b)?,
        Op::Mul => binary(&op, inputs[0], inputs[1], |a, b| a * b)?,
        Op::Div => binary(&op, inputs[0], inputs[1], |a, b| a / b)?,
        Op::Neg => unary(inputs[0], |a| -a),
        Op::Scale(c) => {
            let c = *c;
            unary(inputs[0], |a| a * c)
        }
        Op::Offset(c) => {
            let c = *c;
            unary(inputs[0], |a| a + c)
        }
        Op::MatMul => inputs[0]
            .matmul(inputs[1])
            .map_err(|_| mismatch(&op, inputs[0].shape(), inputs[1].shape()))?,
        Op::Transpose => inputs[0].transpose(),
        Op::Relu => unary(inputs[0], |a| if a > 0.0 { a } else { 0.0 }),
        Op::Exp => unary(inputs[0], libm::exp),
        Op::Log => unary(inputs[0], libm::log),
        Op::Abs => unary(inputs[0], libm::fabs),
        Op::Sqrt => unary(inputs[0], libm::sqrt),
        Op::Powf(p) => {
            let p = *p;
            unary(inputs[0], |a| libm::pow(a, p))
        }
        Op::BroadcastTo(target) => {
            broadcast(inputs[0], *target).ok_or_else(|| mismatch(&op, inputs[0].shape(), *target))?
        }
        Op::SumTo(target) => {
            sum_to(inputs[0], *target).ok_or_else(|| mismatch(&op, inputs[0].shape(), *target))?
        }
        Op::GatherCols(index) => {
            let x = inputs[0];
            if index.len() != x.rows() || index.iter().any(|&j| j >= x.cols()) {
                return Err(mismatch(&op, x.shape(), Shape::new(index.len(), 1)));
            }
            let data = index.iter().enumerate().map(|(r, &c)| x.get(r, c)).collect();
            Tensor::new(x.rows(), 1, data)?
        }
        Op::ScatterCols { index, cols } => {
            let x = inputs[0];
            if x.cols() != 1 || index.len() != x.rows() || index.iter().any(|&j| j >= *cols) {
                return Err(mismatch(&op, x.shape(), Shape::new(index.len(), *cols)));
            }
            let mut data = vec![0.0; x.rows() * cols];
            for (r, &c) in index.iter().enumerate() {
                data[r * cols + c] = x.data()[r];
            }
            Tensor::new(x.rows(), *cols, data)?
        }
        Op::ConcatRows => {
            let cols = inputs[0].cols();
            let mut data = Vec::new();
            let mut rows = 0;
            for t in inputs {
                if t.cols() != cols {
                    return Err(mismatch(&op, inputs[0].shape(), t.shape()));
                }
                rows += t.rows();
                data.extend_from_slice(t.data());
            }
            Tensor::new(rows, cols, data)?
        }
        Op::SliceRows { start, len } => {
            let x = inputs[0];
            if start + len > x.rows() {
                return Err(mismatch(&op, x.shape(), Shape::new(start + len, x.cols())));
            }
            let c = x.cols();
            Tensor::new(*len, c, x.data()[start * c..(start + len) * c].to_vec())?
        }
        Op::PadRows { start, total } => {
            let x = inputs[0];
            if start + x.rows() > *total {
                return Err(mismatch(&op, x.shape(), Shape::new(*total, x.cols())));
            }
            let c = x.cols();
            let mut data = vec![0.0; total * c];
            data[start * c..(start + x.rows()) * c].copy_from_slice(x.data());
            Tensor::new(*total, c, data)?
        }
        Op::LogSoftmax => {
            let x = inputs[0];
            let mut data = Vec::with_capacity(x.shape().numel());
            for row in x.row_iter() {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + libm::log(row.iter().map(|&v| libm::exp(v - max)).sum::<f64>());
                data.extend(row.iter().map(|&v| v - lse));
            }
            Tensor::from_shape(x.shape(), data)?
        }
        Op::PermutahedronProjection(_) => {
            let x = inputs[0];
            let mut data = Vec::with_capacity(x.shape().numel());
            let mut parts = Vec::with_capacity(x.rows());
            for row in x.row_iter() {
                let (projected, part) = rank::project_permutahedron(row);
                data.extend(projected);
                parts.push(part);
            }
            let out = Tensor::from_shape(x.shape(), data)?;
            return Ok((Op::PermutahedronProjection(parts.into()), out));
        }
        Op::BlockAverage(parts) => {
            let x = inputs[0];
            if parts.len() != x.rows() || parts.iter().any(|p| p.len() != x.cols()) {
                return Err(mismatch(&op, x.shape(), Shape::new(parts.len(), x.cols())));
            }
            let mut data = Vec::with_capacity(x.shape().numel());
            for (row, part) in x.row_iter().zip(parts.iter()) {
                data.extend(part.block_average(row));
            }
            Tensor::from_shape(x.shape(), data)?
        }
    };
    Ok((op, out))
}

pub(crate) fn broadcast(x: &Tensor, target: Shape) -> Option<Tensor> {
    let s = x.shape();
    if !s.broadcasts_to(target) {
        return None;
    }
    let mut data = Vec::with_capacity(target.numel());
    for r in 0..target.rows {
        let sr = if s.rows == 1 { 0 } else { r };
        for c in 0..target.cols {
            let sc = if s.cols == 1 { 0 } else { c };
            data.push(x.get(sr, sc));
        }
    }
    Tensor::from_shape(target, data).ok()
}

pub(crate) fn sum_to(x: &Tensor, target: Shape) -> Option<Tensor> {
    if !target.broadcasts_to(x.shape()) {
        return None;
    }
    let mut data = vec![0.0; target.numel()];
    for r in 0..x.rows() {
        let tr = if target.rows == 1 { 0 } else { r };
        for c in 0..x.cols() {
            let tc = if target.cols == 1 { 0 } else { c };
            data[tr * target.cols + tc] += x.get(r, c);
        }
    }
    Tensor::from_shape(target, data).ok()
}
