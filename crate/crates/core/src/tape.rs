//! Reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every op executed through a [`Var`] handle. Calling
//! [`Tape::backward`] on a scalar replays the record in reverse, visiting each
//! op once, and accumulates vector-Jacobian products into every node.

use std::cell::{Cell, RefCell};

use crate::error::{Error, Result};
use crate::tensor::{
    broadcast_index_map, gemm_nt, gemm_tn, matmul_dims, pool_windows,
    transpose_raw, AxisSplit, Tensor, NORM_GUARD,
};

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Relu(usize),
    SumAxis(usize, usize),
    Softmax(usize, usize),
    AvgPool { input: usize, size: usize, stride: usize },
    Reshape(usize),
    Transpose(usize),
    Stack { inputs: Vec<usize>, axis: usize },
    Select { input: usize, axis: usize, index: usize },
    NormalizeLast(usize),
    CrossEntropy { logits: usize, label: usize },
}

/// Op families, used to target [`Fault`] injection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Leaf,
    MatMul,
    Add,
    Sub,
    Mul,
    Scale,
    Relu,
    SumAxis,
    Softmax,
    AvgPool,
    Reshape,
    Transpose,
    Stack,
    Select,
    NormalizeLast,
    CrossEntropy,
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::Mul(..) => OpKind::Mul,
            Op::Scale(..) => OpKind::Scale,
            Op::Relu(..) => OpKind::Relu,
            Op::SumAxis(..) => OpKind::SumAxis,
            Op::Softmax(..) => OpKind::Softmax,
            Op::AvgPool { .. } => OpKind::AvgPool,
            Op::Reshape(..) => OpKind::Reshape,
            Op::Transpose(..) => OpKind::Transpose,
            Op::Stack { .. } => OpKind::Stack,
            Op::Select { .. } => OpKind::Select,
            Op::NormalizeLast(..) => OpKind::NormalizeLast,
            Op::CrossEntropy { .. } => OpKind::CrossEntropy,
        }
    }
}

/// Scales the backward contribution of every op of `kind` by `factor`.
/// Exists to prove that gradient checking catches a broken rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fault {
    pub kind: OpKind,
    pub factor: f64,
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    fault: Cell<Option<Fault>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("id", &self.id).field("shape", &self.shape()).finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fault(fault: Fault) -> Self {
        let tape = Self::new();
        tape.fault.set(Some(fault));
        tape
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records an input value (parameter or constant).
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    fn push(&self, value: Tensor, op: Op) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn with_value<R>(&self, id: usize, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.nodes.borrow()[id].value)
    }

    fn with_values<R>(&self, a: usize, b: usize, f: impl FnOnce(&Tensor, &Tensor) -> R) -> R {
        let nodes = self.nodes.borrow();
        f(&nodes[a].value, &nodes[b].value)
    }

    /// Stacks equal-shaped values along a new `axis`.
    pub fn stack<'t>(&'t self, parts: &[Var<'t>], axis: usize) -> Result<Var<'t>> {
        let value = {
            let nodes = self.nodes.borrow();
            let values: Vec<Tensor> = parts.iter().map(|p| nodes[p.id].value.clone()).collect();
            Tensor::stack(&values, axis)?
        };
        let inputs = parts.iter().map(|p| p.id).collect();
        Ok(self.push(value, Op::Stack { inputs, axis }))
    }

    /// Accumulates `d loss / d node` for every node recorded before `loss`.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id].value;
        if root.numel() != 1 {
            return Err(Error::invalid_shape("backward", root.shape(), "loss must be a scalar"));
        }
        let fault = self.fault.get();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.id] = Some(vec![1.0]);

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            let factor = match fault {
                Some(f) if f.kind == node.op.kind() => f.factor,
                _ => 1.0,
            };
            let mut contributions: Vec<(usize, Vec<f64>)> = Vec::with_capacity(2);
            vjp(&nodes, node, &g, &mut contributions);
            for (input, mut delta) in contributions {
                if factor != 1.0 {
                    delta.iter_mut().for_each(|v| *v *= factor);
                }
                match &mut grads[input] {
                    Some(acc) => acc.iter_mut().zip(&delta).for_each(|(a, d)| *a += d),
                    slot @ None => *slot = Some(delta),
                }
            }
            grads[id] = Some(g);
        }

        let shapes = nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }
}

fn vjp(nodes: &[Node], node: &Node, g: &[f64], out: &mut Vec<(usize, Vec<f64>)>) {
    let value = |id: usize| &nodes[id].value;
    match node.op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (m, k, n) = matmul_dims(value(a).shape(), value(b).shape()).expect("checked in forward");
            out.push((a, gemm_nt(g, value(b).data(), m, n, k)));
            out.push((b, gemm_tn(value(a).data(), g, m, k, n)));
        }
        Op::Add(a, b) => {
            out.push((a, reduce_to(g, node.value.shape(), value(a).shape())));
            out.push((b, reduce_to(g, node.value.shape(), value(b).shape())));
        }
        Op::Sub(a, b) => {
            out.push((a, reduce_to(g, node.value.shape(), value(a).shape())));
            let mut db = reduce_to(g, node.value.shape(), value(b).shape());
            db.iter_mut().for_each(|v| *v = -*v);
            out.push((b, db));
        }
        Op::Mul(a, b) => {
            let shape = node.value.shape();
            let (va, vb) = (value(a), value(b));
            let map_a = broadcast_index_map(va.shape(), shape);
            let map_b = broadcast_index_map(vb.shape(), shape);
            let mut da = vec![0.0; va.numel()];
            let mut db = vec![0.0; vb.numel()];
            for (j, &gj) in g.iter().enumerate() {
                da[map_a[j]] += gj * vb.data()[map_b[j]];
                db[map_b[j]] += gj * va.data()[map_a[j]];
            }
            out.push((a, da));
            out.push((b, db));
        }
        Op::Scale(a, c) => out.push((a, g.iter().map(|v| v * c).collect())),
        Op::Relu(a) => {
            let x = value(a).data();
            out.push((a, g.iter().zip(x).map(|(&gv, &xv)| if xv > 0.0 { gv } else { 0.0 }).collect()));
        }
        Op::SumAxis(a, axis) => {
            let split = AxisSplit::new(value(a).shape(), axis);
            let mut da = vec![0.0; value(a).numel()];
            for o in 0..split.outer {
                for i in 0..split.len {
                    for n in 0..split.inner {
                        da[split.index(o, i, n)] = g[o * split.inner + n];
                    }
                }
            }
            out.push((a, da));
        }
        Op::Softmax(a, axis) => {
            let y = node.value.data();
            let split = AxisSplit::new(node.value.shape(), axis);
            let mut da = vec![0.0; y.len()];
            for o in 0..split.outer {
                for n in 0..split.inner {
                    let dot: f64 = (0..split.len)
                        .map(|i| {
                            let at = split.index(o, i, n);
                            g[at] * y[at]
                        })
                        .sum();
                    for i in 0..split.len {
                        let at = split.index(o, i, n);
                        da[at] = y[at] * (g[at] - dot);
                    }
                }
            }
            out.push((a, da));
        }
        Op::AvgPool { input, size, stride } => {
            let shape = value(input).shape();
            let windows = pool_windows(shape, size, stride).expect("checked in forward");
            let width: usize = shape[1..].iter().product();
            let mut da = vec![0.0; value(input).numel()];
            for (n, &(start, end)) in windows.iter().enumerate() {
                let inv = 1.0 / (end - start) as f64;
                let src = &g[n * width..(n + 1) * width];
                for t in start..end {
                    for (d, s) in da[t * width..(t + 1) * width].iter_mut().zip(src) {
                        *d += s * inv;
                    }
                }
            }
            out.push((input, da));
        }
        Op::Reshape(a) => out.push((a, g.to_vec())),
        Op::Transpose(a) => {
            let shape = node.value.shape();
            out.push((a, transpose_raw(g, shape[0], shape[1])));
        }
        Op::Stack { ref inputs, axis } => {
            let split = AxisSplit::new(node.value.shape(), axis);
            for (i, &input) in inputs.iter().enumerate() {
                let mut d = Vec::with_capacity(split.outer * split.inner);
                for o in 0..split.outer {
                    let at = split.index(o, i, 0);
                    d.extend_from_slice(&g[at..at + split.inner]);
                }
                out.push((input, d));
            }
        }
        Op::Select { input, axis, index } => {
            let split = AxisSplit::new(value(input).shape(), axis);
            let mut d = vec![0.0; value(input).numel()];
            for o in 0..split.outer {
                let at = split.index(o, index, 0);
                d[at..at + split.inner].copy_from_slice(&g[o * split.inner..(o + 1) * split.inner]);
            }
            out.push((input, d));
        }
        Op::NormalizeLast(a) => {
            let x = value(a).data();
            let y = node.value.data();
            let width = node.value.shape().last().copied().unwrap_or(1);
            let mut d = vec![0.0; x.len()];
            for start in (0..x.len()).step_by(width) {
                let r = start..start + width;
                let norm = x[r.clone()].iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm < NORM_GUARD {
                    d[r.clone()].copy_from_slice(&g[r]);
                    continue;
                }
                let proj: f64 = g[r.clone()].iter().zip(&y[r.clone()]).map(|(a, b)| a * b).sum();
                for i in r {
                    d[i] = (g[i] - y[i] * proj) / norm;
                }
            }
            out.push((a, d));
        }
        Op::CrossEntropy { logits, label } => {
            let probs = value(logits).softmax(0).expect("checked in forward");
            let mut d: Vec<f64> = probs.data().iter().map(|p| p * g[0]).collect();
            d[label] -= g[0];
            out.push((logits, d));
        }
    }
}

/// Sums a broadcast gradient back down to `target` shape.
fn reduce_to(g: &[f64], shape: &[usize], target: &[usize]) -> Vec<f64> {
    if shape == target {
        return g.to_vec();
    }
    let map = broadcast_index_map(target, shape);
    let mut out = vec![0.0; target.iter().product()];
    for (j, &gj) in g.iter().enumerate() {
        out[map[j]] += gj;
    }
    out
}

/// Result of [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient with respect to `var`; zeros when `var` does not reach the loss.
    pub fn wrt(&self, var: Var<'_>) -> Tensor {
        let shape = self.shapes[var.id].clone();
        match &self.grads[var.id] {
            Some(g) => Tensor::new(shape, g.clone()).expect("gradient shape matches value"),
            None => Tensor::zeros(&shape),
        }
    }

    pub fn reaches(&self, var: Var<'_>) -> bool {
        self.grads[var.id].is_some()
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Tensor {
        self.tape.with_value(self.id, Tensor::clone)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.with_value(self.id, |v| v.shape().to_vec())
    }

    pub fn data(&self) -> Vec<f64> {
        self.tape.with_value(self.id, |v| v.data().to_vec())
    }

    fn same_tape(&self, rhs: &Var<'t>) {
        assert!(std::ptr::eq(self.tape, rhs.tape), "vars belong to different tapes");
    }

    fn binary(self, rhs: Var<'t>, f: impl FnOnce(&Tensor, &Tensor) -> Result<Tensor>, op: Op) -> Result<Var<'t>> {
        self.same_tape(&rhs);
        let value = self.tape.with_values(self.id, rhs.id, f)?;
        Ok(self.tape.push(value, op))
    }

    fn unary(self, f: impl FnOnce(&Tensor) -> Result<Tensor>, op: Op) -> Result<Var<'t>> {
        let value = self.tape.with_value(self.id, f)?;
        Ok(self.tape.push(value, op))
    }

    pub fn matmul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.binary(rhs, Tensor::matmul, Op::MatMul(self.id, rhs.id))
    }

    pub fn add(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.binary(rhs, Tensor::add, Op::Add(self.id, rhs.id))
    }

    pub fn sub(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.binary(rhs, Tensor::sub, Op::Sub(self.id, rhs.id))
    }

    pub fn mul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.binary(rhs, Tensor::mul, Op::Mul(self.id, rhs.id))
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        let value = self.tape.with_value(self.id, |v| v.scale(c));
        self.tape.push(value, Op::Scale(self.id, c))
    }

    pub fn relu(self) -> Var<'t> {
        let value = self.tape.with_value(self.id, Tensor::relu);
        self.tape.push(value, Op::Relu(self.id))
    }

    pub fn sum_axis(self, axis: usize) -> Result<Var<'t>> {
        self.unary(|v| v.sum_axis(axis), Op::SumAxis(self.id, axis))
    }

    pub fn softmax(self, axis: usize) -> Result<Var<'t>> {
        self.unary(|v| v.softmax(axis), Op::Softmax(self.id, axis))
    }

    pub fn avg_pool_1d(self, size: usize, stride: usize) -> Result<Var<'t>> {
        self.unary(
            |v| v.avg_pool_1d(size, stride),
            Op::AvgPool {
                input: self.id,
                size,
                stride,
            },
        )
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>> {
        self.unary(|v| v.reshape(shape), Op::Reshape(self.id))
    }

    pub fn transpose(self) -> Result<Var<'t>> {
        self.unary(Tensor::transpose, Op::Transpose(self.id))
    }

    pub fn select(self, axis: usize, index: usize) -> Result<Var<'t>> {
        self.unary(
            |v| v.select(axis, index),
            Op::Select {
                input: self.id,
                axis,
                index,
            },
        )
    }

    /// Unit-L2 rows along the last axis (near-zero rows pass through).
    pub fn normalize_last(self) -> Var<'t> {
        let value = self.tape.with_value(self.id, Tensor::normalize_last);
        self.tape.push(value, Op::NormalizeLast(self.id))
    }

    /// `logsumexp(self) - self[label]` for a logit vector.
    pub fn cross_entropy(self, label: usize) -> Result<Var<'t>> {
        let value = self.tape.with_value(self.id, |v| -> Result<Tensor> {
            if v.rank() != 1 {
                return Err(Error::invalid_shape("cross_entropy", v.shape(), "expected a logit vector"));
            }
            if label >= v.numel() {
                return Err(Error::InvalidArgument(format!(
                    "label {label} out of range for {} classes",
                    v.numel()
                )));
            }
            let max = v.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + v.data().iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            Ok(Tensor::scalar(lse - v.data()[label]))
        })?;
        Ok(self.tape.push(
            value,
            Op::CrossEntropy {
                logits: self.id,
                label,
            },
        ))
    }

    /// Inner product of two equal-shaped vectors, as a scalar.
    pub fn dot(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let prod = self.mul(rhs)?;
        prod.sum_axis(0)
    }
}
