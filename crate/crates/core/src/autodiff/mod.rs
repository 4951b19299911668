//! Reverse-mode automatic differentiation on an append-only tape.
//!
//! A [`Graph`] records every primitive applied to [`Var`] handles. Because
//! each vector-Jacobian rule is itself expressed with primitives, the
//! cotangents produced by [`Graph::gradient`] with `create_graph = true`
//! are ordinary graph nodes and can be differentiated again.
//!
//! A graph is an arena: create one per step, drop it when done.

mod backward;
mod op;

use alloc::rc::Rc;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::fmt;

pub use op::Op;

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

struct Node {
    op: Op,
    parents: Vec<NodeId>,
    value: Rc<Tensor>,
}

/// Append-only tape of primitive applications.
///
/// Parents always precede their children, so node order is a topological
/// order.
#[derive(Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph").field("nodes", &self.len()).finish()
    }
}

/// A tensor attached to a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g> {
    graph: &'g Graph,
    id: NodeId,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Adds a leaf holding `value`. Leaves are both constants and
    /// differentiation targets; what matters is whether they are passed as
    /// `wrt` to [`Graph::gradient`].
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(Op::Leaf, Vec::new(), value)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.leaf(Tensor::scalar(value))
    }

    fn push(&self, op: Op, parents: Vec<NodeId>, value: Tensor) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let id = NodeId(nodes.len());
        nodes.push(Node {
            op,
            parents,
            value: Rc::new(value),
        });
        Var { graph: self, id }
    }

    fn check_owner(&self, v: Var<'_>) -> Result<()> {
        if core::ptr::eq(self, v.graph) {
            Ok(())
        } else {
            Err(Error::ForeignTensor)
        }
    }

    /// Applies a primitive to `inputs` and records the result.
    pub fn apply<'g>(&'g self, op: Op, inputs: &[Var<'g>]) -> Result<Var<'g>> {
        for v in inputs {
            self.check_owner(*v)?;
        }
        let values: Vec<Rc<Tensor>> = inputs.iter().map(|v| v.value_rc()).collect();
        let refs: Vec<&Tensor> = values.iter().map(|t| t.as_ref()).collect();
        let (op, value) = op::forward(op, &refs)?;
        Ok(self.push(op, inputs.iter().map(|v| v.id).collect(), value))
    }

    fn value_of(&self, id: NodeId) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id.0].value)
    }

    fn var(&self, id: NodeId) -> Var<'_> {
        Var { graph: self, id }
    }

    /// Recomputes every non-leaf node from its parents and reports whether
    /// all values come out bit-identical to the recorded ones.
    pub fn replay_matches(&self) -> bool {
        let nodes = self.nodes.borrow();
        let mut replayed: Vec<Rc<Tensor>> = Vec::with_capacity(nodes.len());
        for node in nodes.iter() {
            if node.parents.is_empty() {
                replayed.push(Rc::clone(&node.value));
                continue;
            }
            let inputs: Vec<&Tensor> = node.parents.iter().map(|p| replayed[p.0].as_ref()).collect();
            // projections recompute their partition from the inputs
            let value = match op::forward(node.op.clone(), &inputs) {
                Ok((_, v)) => v,
                Err(_) => return false,
            };
            let same = value.shape() == node.value.shape()
                && value
                    .data()
                    .iter()
                    .zip(node.value.data())
                    .all(|(a, b)| a.to_bits() == b.to_bits());
            if !same {
                return false;
            }
            replayed.push(Rc::new(value));
        }
        true
    }

    /// Gradient of the scalar `output` with respect to each tensor in `wrt`.
    ///
    /// With `create_graph` the returned cotangents are nodes built from
    /// primitives and can be differentiated again. Without it the backward
    /// nodes are discarded and the results come back as fresh leaves.
    /// A `wrt` tensor that does not influence `output` gets a zero gradient.
    pub fn gradient<'g>(
        &'g self,
        output: Var<'g>,
        wrt: &[Var<'g>],
        create_graph: bool,
    ) -> Result<Vec<Var<'g>>> {
        self.check_owner(output)?;
        for v in wrt {
            self.check_owner(*v)?;
        }
        let shape = output.shape();
        if !shape.is_scalar() {
            return Err(Error::NonScalarOutput(shape));
        }
        let mark = self.len();
        let grads = backward::run(self, output.id, wrt)?;
        if create_graph {
            return Ok(grads);
        }
        let values: Vec<Tensor> = grads.iter().map(|g| g.value()).collect();
        self.nodes.borrow_mut().truncate(mark);
        Ok(values.into_iter().map(|t| self.leaf(t)).collect())
    }
}

#[allow(clippy::should_implement_trait)]
impl<'g> Var<'g> {
    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    fn value_rc(&self) -> Rc<Tensor> {
        self.graph.value_of(self.id)
    }

    /// A copy of the forward value.
    pub fn value(&self) -> Tensor {
        self.value_rc().as_ref().clone()
    }

    pub fn shape(&self) -> Shape {
        self.graph.nodes.borrow()[self.id.0].value.shape()
    }

    /// The value of a `1×1` var.
    pub fn item(&self) -> f64 {
        self.value_rc().data()[0]
    }

    fn unary(self, op: Op) -> Var<'g> {
        self.graph
            .apply(op, &[self])
            .expect("unary primitives accept any shape")
    }

    fn binary(self, op: Op, other: Var<'g>) -> Result<Var<'g>> {
        let (a, b) = self.broadcast_pair(other, op.name())?;
        self.graph.apply(op, &[a, b])
    }

    /// Broadcasts both operands to a common shape, inserting explicit
    /// broadcast nodes where needed.
    fn broadcast_pair(self, other: Var<'g>, name: &'static str) -> Result<(Var<'g>, Var<'g>)> {
        let (sa, sb) = (self.shape(), other.shape());
        if sa == sb {
            return Ok((self, other));
        }
        let target = Shape::new(sa.rows.max(sb.rows), sa.cols.max(sb.cols));
        if !sa.broadcasts_to(target) || !sb.broadcasts_to(target) {
            return Err(Error::ShapeMismatch {
                op: name,
                left: sa,
                right: sb,
            });
        }
        Ok((self.broadcast_to(target)?, other.broadcast_to(target)?))
    }

    pub fn add(self, other: Var<'g>) -> Result<Var<'g>> {
        self.binary(Op::Add, other)
    }

    pub fn sub(self, other: Var<'g>) -> Result<Var<'g>> {
        self.binary(Op::Sub, other)
    }

    pub fn mul(self, other: Var<'g>) -> Result<Var<'g>> {
        self.binary(Op::Mul, other)
    }

    pub fn div(self, other: Var<'g>) -> Result<Var<'g>> {
        self.binary(Op::Div, other)
    }

    pub fn neg(self) -> Var<'g> {
        self.unary(Op::Neg)
    }

    pub fn scale(self, c: f64) -> Var<'g> {
        self.unary(Op::Scale(c))
    }

    pub fn offset(self, c: f64) -> Var<'g> {
        self.unary(Op::Offset(c))
    }

    pub fn matmul(self, other: Var<'g>) -> Result<Var<'g>> {
        self.graph.apply(Op::MatMul, &[self, other])
    }

    pub fn t(self) -> Var<'g> {
        self.unary(Op::Transpose)
    }

    pub fn relu(self) -> Var<'g> {
        self.unary(Op::Relu)
    }

    pub fn exp(self) -> Var<'g> {
        self.unary(Op::Exp)
    }

    pub fn ln(self) -> Var<'g> {
        self.unary(Op::Log)
    }

    pub fn abs(self) -> Var<'g> {
        self.unary(Op::Abs)
    }

    pub fn sqrt(self) -> Var<'g> {
        self.unary(Op::Sqrt)
    }

    pub fn powf(self, p: f64) -> Var<'g> {
        self.unary(Op::Powf(p))
    }

    /// `tanh(x) = 1 - 2 / (exp(2x) + 1)`, composed from primitives.
    pub fn tanh(self) -> Result<Var<'g>> {
        let e = self.scale(2.0).exp().offset(1.0);
        let two = self.graph.scalar(2.0);
        Ok(two.div(e)?.neg().offset(1.0))
    }

    pub fn broadcast_to(self, target: Shape) -> Result<Var<'g>> {
        if self.shape() == target {
            return Ok(self);
        }
        self.graph.apply(Op::BroadcastTo(target), &[self])
    }

    pub fn sum_to(self, target: Shape) -> Result<Var<'g>> {
        if self.shape() == target {
            return Ok(self);
        }
        self.graph.apply(Op::SumTo(target), &[self])
    }

    /// Sum of all entries.
    pub fn sum(self) -> Var<'g> {
        self.sum_to(Shape::SCALAR)
            .expect("every shape reduces to a scalar")
    }

    pub fn mean(self) -> Var<'g> {
        let n = self.shape().numel() as f64;
        self.sum().scale(1.0 / n)
    }

    /// Per-row sums as a `rows×1` column.
    pub fn sum_cols(self) -> Var<'g> {
        let s = self.shape();
        self.sum_to(Shape::new(s.rows, 1)).expect("column reduction")
    }

    pub fn mean_cols(self) -> Var<'g> {
        let n = self.shape().cols as f64;
        self.sum_cols().scale(1.0 / n)
    }

    /// Per-column sums as a `1×cols` row.
    pub fn sum_rows(self) -> Var<'g> {
        let s = self.shape();
        self.sum_to(Shape::new(1, s.cols)).expect("row reduction")
    }

    pub fn gather_cols(self, index: &[usize]) -> Result<Var<'g>> {
        self.graph.apply(Op::GatherCols(index.into()), &[self])
    }

    pub fn slice_rows(self, start: usize, len: usize) -> Result<Var<'g>> {
        self.graph.apply(Op::SliceRows { start, len }, &[self])
    }

    pub fn log_softmax(self) -> Var<'g> {
        self.unary(Op::LogSoftmax)
    }
}

/// Stacks vars with equal column counts vertically.
pub fn concat_rows<'g>(parts: &[Var<'g>]) -> Result<Var<'g>> {
    let first = parts.first().ok_or(Error::EmptyInput)?;
    first.graph.apply(Op::ConcatRows, parts)
}

#[cfg(test)]
mod tests;
