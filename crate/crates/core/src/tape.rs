//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every operation in execution order, so node ids are a
//! topological order by construction. [`Tape::backward`] walks the records in
//! reverse and accumulates (`+=`) gradients into every input that requires
//! one.

use std::sync::atomic::{AtomicU32, Ordering};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

static NEXT_TAPE_ID: AtomicU32 = AtomicU32::new(1);

/// Handle to a value recorded on a particular tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u32,
    index: usize,
}

impl Var {
    pub fn index(self) -> usize {
        self.index
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pointwise {
    Sigmoid,
    Tanh,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Concat(usize, usize),
    Slice { src: usize, start: usize },
    Row { src: usize, row: usize },
    Sum(usize),
    Softmax(usize),
    LeakyRelu(usize, f64),
    Pointwise(usize, Pointwise),
    Dropout(usize, Vec<f64>),
    CrossEntropy { logits: usize, label: usize, probs: Vec<f64> },
}

impl Op {
    fn inputs(&self) -> Vec<usize> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Mul(a, b) | Op::Concat(a, b) => vec![*a, *b],
            Op::Scale(a, _)
            | Op::Slice { src: a, .. }
            | Op::Row { src: a, .. }
            | Op::Sum(a)
            | Op::Softmax(a)
            | Op::LeakyRelu(a, _)
            | Op::Pointwise(a, _)
            | Op::Dropout(a, _)
            | Op::CrossEntropy { logits: a, .. } => vec![*a],
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Concat(..) => "concat",
            Op::Slice { .. } => "slice",
            Op::Row { .. } => "row",
            Op::Sum(_) => "sum",
            Op::Softmax(_) => "softmax",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Pointwise(_, Pointwise::Sigmoid) => "sigmoid",
            Op::Pointwise(_, Pointwise::Tanh) => "tanh",
            Op::Dropout(..) => "dropout",
            Op::CrossEntropy { .. } => "cross_entropy",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradients produced by [`Tape::backward`], one per `requires_grad` leaf.
#[derive(Debug, Clone)]
pub struct Gradients {
    tape: u32,
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        if var.tape != self.tape {
            return None;
        }
        self.grads.get(var.index).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        if var.tape != self.tape {
            return None;
        }
        self.grads.get_mut(var.index).and_then(|g| g.take())
    }
}

#[derive(Debug)]
pub struct Tape {
    id: u32,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn check(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(Error::CorruptTape(format!(
                "variable {} does not belong to this tape",
                v.index
            )));
        }
        Ok(v.index)
    }

    fn push(&mut self, value: Tensor, op: Op) -> Result<Var> {
        if cfg!(debug_assertions) && !value.is_finite() {
            return Err(Error::NonFinite(op.name()));
        }
        let requires_grad = op.inputs().iter().any(|&i| self.nodes[i].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        })
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.index].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.index].requires_grad
    }

    /// Matrix product. A rank-1 left operand is a row vector and a rank-1
    /// right operand a column vector; the unit dimension is dropped from the
    /// result.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let (ta, tb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        let out = matmul_forward(ta, tb)?;
        self.push(out, Op::MatMul(ia, ib))
    }

    /// Elementwise sum; `b` may also be a one-element tensor broadcast over `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let (ta, tb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        let out = if ta.shape() == tb.shape() {
            let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
            Tensor::new(ta.shape().to_vec(), data)?
        } else if tb.len() == 1 && tb.rank() <= 1 {
            let c = tb.data()[0];
            ta.map(|x| x + c)
        } else {
            return Err(shape_err("add", ta, tb));
        };
        self.push(out, Op::Add(ia, ib))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let (ta, tb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if ta.shape() != tb.shape() {
            return Err(shape_err("mul", ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(out, Op::Mul(ia, ib))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let ia = self.check(a)?;
        let out = self.nodes[ia].value.map(|x| x * factor);
        self.push(out, Op::Scale(ia, factor))
    }

    /// Concatenation of two vectors.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let (ta, tb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if ta.rank() != 1 || tb.rank() != 1 {
            return Err(Error::Rank {
                op: "concat",
                reason: format!("operands must be vectors, got {:?} and {:?}", ta.shape(), tb.shape()),
            });
        }
        let mut data = Vec::with_capacity(ta.len() + tb.len());
        data.extend_from_slice(ta.data());
        data.extend_from_slice(tb.data());
        self.push(Tensor::vector(data), Op::Concat(ia, ib))
    }

    /// `a[start..start + len]` of a vector.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let ia = self.check(a)?;
        let ta = &self.nodes[ia].value;
        if ta.rank() != 1 {
            return Err(Error::Rank {
                op: "slice",
                reason: format!("expected a vector, got {:?}", ta.shape()),
            });
        }
        if start + len > ta.len() {
            return Err(Error::Index {
                what: "slice",
                index: start + len,
                size: ta.len(),
            });
        }
        let out = Tensor::vector(ta.data()[start..start + len].to_vec());
        self.push(out, Op::Slice { src: ia, start })
    }

    /// One row of a matrix, as a vector.
    pub fn row(&mut self, a: Var, row: usize) -> Result<Var> {
        let ia = self.check(a)?;
        let ta = &self.nodes[ia].value;
        if ta.rank() != 2 {
            return Err(Error::Rank {
                op: "row",
                reason: format!("expected a matrix, got {:?}", ta.shape()),
            });
        }
        if row >= ta.rows() {
            return Err(Error::Index {
                what: "row",
                index: row,
                size: ta.rows(),
            });
        }
        let out = Tensor::vector(ta.row(row).to_vec());
        self.push(out, Op::Row { src: ia, row })
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let ia = self.check(a)?;
        let out = Tensor::scalar(self.nodes[ia].value.sum());
        self.push(out, Op::Sum(ia))
    }

    /// Numerically stable softmax of a nonempty vector.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let ia = self.check(a)?;
        let ta = &self.nodes[ia].value;
        if ta.rank() != 1 {
            return Err(Error::Rank {
                op: "softmax",
                reason: format!("expected a vector, got {:?}", ta.shape()),
            });
        }
        if ta.is_empty() {
            return Err(Error::Empty("softmax of an empty vector".into()));
        }
        let out = Tensor::vector(softmax_values(ta.data()));
        self.push(out, Op::Softmax(ia))
    }

    /// `max(x, alpha * x)` elementwise; `alpha = 0` is ReLU. The derivative
    /// at exactly zero is taken to be `alpha`.
    pub fn leaky_relu(&mut self, a: Var, alpha: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::Parameter(format!("leaky_relu alpha {alpha} outside [0, 1)")));
        }
        let ia = self.check(a)?;
        let out = self.nodes[ia].value.map(|x| if x > 0.0 { x } else { alpha * x });
        self.push(out, Op::LeakyRelu(ia, alpha))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.leaky_relu(a, 0.0)
    }

    pub fn pointwise(&mut self, kind: Pointwise, a: Var) -> Result<Var> {
        let ia = self.check(a)?;
        let out = match kind {
            Pointwise::Sigmoid => self.nodes[ia].value.map(sigmoid),
            Pointwise::Tanh => self.nodes[ia].value.map(f64::tanh),
        };
        self.push(out, Op::Pointwise(ia, kind))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.pointwise(Pointwise::Sigmoid, a)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.pointwise(Pointwise::Tanh, a)
    }

    /// Inverted dropout: at training time each entry is zeroed with
    /// probability `p` and survivors are scaled by `1 / (1 - p)`; at inference
    /// the input passes through untouched.
    pub fn dropout(&mut self, a: Var, p: f64, training: bool, rng: &mut Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Parameter(format!("dropout rate {p} outside [0, 1)")));
        }
        let ia = self.check(a)?;
        if !training || p == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - p);
        let n = self.nodes[ia].value.len();
        let mask: Vec<f64> = (0..n).map(|_| if rng.uniform() < p { 0.0 } else { keep }).collect();
        let ta = &self.nodes[ia].value;
        let data = ta.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(out, Op::Dropout(ia, mask))
    }

    /// `-log softmax(logits)[label]`, computed through log-sum-exp.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var> {
        let il = self.check(logits)?;
        let tl = &self.nodes[il].value;
        if tl.rank() != 1 || tl.is_empty() {
            return Err(Error::Rank {
                op: "cross_entropy",
                reason: format!("logits must be a nonempty vector, got {:?}", tl.shape()),
            });
        }
        if label >= tl.len() {
            return Err(Error::Index {
                what: "class label",
                index: label,
                size: tl.len(),
            });
        }
        let x = tl.data();
        let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - x[label];
        let probs = softmax_values(x);
        self.push(Tensor::scalar(loss), Op::CrossEntropy { logits: il, label, probs })
    }

    /// Gradients of the scalar `loss` with respect to every `requires_grad`
    /// leaf. Leaves the loss does not depend on get zero gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = self.check(loss)?;
        if self.nodes[root].value.len() != 1 {
            return Err(Error::Rank {
                op: "backward",
                reason: format!("loss must be scalar, got shape {:?}", self.nodes[root].value.shape()),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        let mut out: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        if self.nodes[root].requires_grad {
            grads[root] = Some(Tensor::full(self.nodes[root].value.shape(), 1.0));
        }

        for i in (0..=root).rev() {
            let node = &self.nodes[i];
            let Some(g) = grads[i].take() else { continue };
            for input in node.op.inputs() {
                if input >= i {
                    return Err(Error::CorruptTape(format!(
                        "node {i} ({}) references input {input} that does not precede it",
                        node.op.name()
                    )));
                }
            }
            if let Op::Leaf = node.op {
                out[i] = Some(g);
                continue;
            }
            self.propagate(i, &g, &mut grads)?;
        }

        for (i, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && node.requires_grad && out[i].is_none() {
                out[i] = Some(Tensor::zeros(node.value.shape()));
            }
        }
        Ok(Gradients {
            tape: self.id,
            grads: out,
        })
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[i];
        let needs = |j: usize| self.nodes[j].requires_grad;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                let (m, k, n) = (ta.len() / inner(ta), inner(ta), tb.len() / inner(ta));
                let gd = g.data();
                if needs(*a) {
                    let mut da = vec![0.0; m * k];
                    let bd = tb.data();
                    for r in 0..m {
                        let grow = &gd[r * n..(r + 1) * n];
                        for p in 0..k {
                            da[r * k + p] = dot(grow, &bd[p * n..(p + 1) * n]);
                        }
                    }
                    accumulate(grads, *a, ta.shape(), da);
                }
                if needs(*b) {
                    let mut db = vec![0.0; k * n];
                    let ad = ta.data();
                    for r in 0..m {
                        let grow = &gd[r * n..(r + 1) * n];
                        for p in 0..k {
                            let s = ad[r * k + p];
                            if s != 0.0 {
                                axpy(&mut db[p * n..(p + 1) * n], s, grow);
                            }
                        }
                    }
                    accumulate(grads, *b, tb.shape(), db);
                }
            }
            Op::Add(a, b) => {
                if needs(*a) {
                    accumulate(grads, *a, g.shape(), g.data().to_vec());
                }
                if needs(*b) {
                    let tb = &self.nodes[*b].value;
                    if tb.shape() == g.shape() {
                        accumulate(grads, *b, tb.shape(), g.data().to_vec());
                    } else {
                        accumulate(grads, *b, tb.shape(), vec![g.sum()]);
                    }
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                if needs(*a) {
                    let d = g.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
                    accumulate(grads, *a, ta.shape(), d);
                }
                if needs(*b) {
                    let d = g.data().iter().zip(ta.data()).map(|(x, y)| x * y).collect();
                    accumulate(grads, *b, tb.shape(), d);
                }
            }
            Op::Scale(a, factor) => {
                let d = g.data().iter().map(|x| x * factor).collect();
                accumulate(grads, *a, g.shape(), d);
            }
            Op::Concat(a, b) => {
                let m = self.nodes[*a].value.len();
                if needs(*a) {
                    accumulate(grads, *a, &[m], g.data()[..m].to_vec());
                }
                if needs(*b) {
                    let n = g.len() - m;
                    accumulate(grads, *b, &[n], g.data()[m..].to_vec());
                }
            }
            Op::Slice { src, start } => {
                let ts = &self.nodes[*src].value;
                let mut d = vec![0.0; ts.len()];
                d[*start..*start + g.len()].copy_from_slice(g.data());
                accumulate(grads, *src, ts.shape(), d);
            }
            Op::Row { src, row } => {
                let ts = &self.nodes[*src].value;
                let c = ts.cols();
                let mut d = vec![0.0; ts.len()];
                d[row * c..(row + 1) * c].copy_from_slice(g.data());
                accumulate(grads, *src, ts.shape(), d);
            }
            Op::Sum(a) => {
                let ta = &self.nodes[*a].value;
                let s = g.data()[0];
                accumulate(grads, *a, ta.shape(), vec![s; ta.len()]);
            }
            Op::Softmax(a) => {
                let y = node.value.data();
                let gy = dot(g.data(), y);
                let d = y.iter().zip(g.data()).map(|(yi, gi)| yi * (gi - gy)).collect();
                accumulate(grads, *a, node.value.shape(), d);
            }
            Op::LeakyRelu(a, alpha) => {
                let x = self.nodes[*a].value.data();
                let d = x
                    .iter()
                    .zip(g.data())
                    .map(|(xi, gi)| if *xi > 0.0 { *gi } else { alpha * gi })
                    .collect();
                accumulate(grads, *a, node.value.shape(), d);
            }
            Op::Pointwise(a, kind) => {
                let y = node.value.data();
                let d = y
                    .iter()
                    .zip(g.data())
                    .map(|(yi, gi)| match kind {
                        Pointwise::Sigmoid => gi * yi * (1.0 - yi),
                        Pointwise::Tanh => gi * (1.0 - yi * yi),
                    })
                    .collect();
                accumulate(grads, *a, node.value.shape(), d);
            }
            Op::Dropout(a, mask) => {
                let d = g.data().iter().zip(mask).map(|(x, m)| x * m).collect();
                accumulate(grads, *a, node.value.shape(), d);
            }
            Op::CrossEntropy { logits, label, probs } => {
                let s = g.data()[0];
                let mut d: Vec<f64> = probs.iter().map(|p| p * s).collect();
                d[*label] -= s;
                accumulate(grads, *logits, &[probs.len()], d);
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Tensor>], at: usize, shape: &[usize], delta: Vec<f64>) {
    match &mut grads[at] {
        Some(existing) => {
            for (e, d) in existing.data_mut().iter_mut().zip(delta) {
                *e += d;
            }
        }
        slot @ None => {
            *slot = Some(Tensor::new(shape.to_vec(), delta).expect("gradient shape mirrors value"));
        }
    }
}

/// Shared inner dimension of a matmul left operand.
fn inner(a: &Tensor) -> usize {
    match a.rank() {
        1 => a.len(),
        _ => a.shape()[1],
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

pub(crate) fn matmul_forward(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k, out_rows) = match a.rank() {
        1 => (1, a.len(), false),
        2 => (a.shape()[0], a.shape()[1], true),
        _ => return Err(shape_err("matmul", a, b)),
    };
    let (kb, n, out_cols) = match b.rank() {
        1 => (b.len(), 1, false),
        2 => (b.shape()[0], b.shape()[1], true),
        _ => return Err(shape_err("matmul", a, b)),
    };
    if k != kb || (!out_rows && !out_cols) {
        return Err(shape_err("matmul", a, b));
    }
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; m * n];
    if n == 1 {
        for (r, o) in out.iter_mut().enumerate() {
            *o = dot(&ad[r * k..(r + 1) * k], bd);
        }
    } else {
        for r in 0..m {
            let orow = &mut out[r * n..(r + 1) * n];
            for p in 0..k {
                let s = ad[r * k + p];
                if s != 0.0 {
                    axpy(orow, s, &bd[p * n..(p + 1) * n]);
                }
            }
        }
    }
    let shape = match (out_rows, out_cols) {
        (true, true) => vec![m, n],
        (true, false) => vec![m],
        _ => vec![n],
    };
    Tensor::new(shape, out)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_values(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::rng::Rng;

    fn mat(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let mut tape = Tape::new();
        let i = tape.constant(Tensor::eye(2));
        let m = tape.constant(mat(&[&[1.0, 2.0], &[3.0, 4.0]]));
        let out = tape.matmul(i, m).unwrap();
        assert_eq!(tape.value(out).data(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(tape.value(out).shape(), &[2, 2]);
    }

    #[test]
    fn matmul_row_by_column() {
        let mut tape = Tape::new();
        let a = tape.constant(mat(&[&[1.0, 2.0]]));
        let b = tape.constant(mat(&[&[3.0], &[4.0]]));
        let out = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(out).data(), &[11.0]);
        assert_eq!(tape.value(out).shape(), &[1, 1]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 3]));
        let err = tape.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "{err}");
        assert!(matches!(tape.matmul(a, b), Err(Error::Shape { .. })));
    }

    #[test]
    fn concat_values_and_empty_operand() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::vector(vec![1.0, 2.0]));
        let b = tape.constant(Tensor::vector(vec![3.0]));
        let c = tape.concat(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 2.0, 3.0]);

        let e = tape.constant(Tensor::vector(vec![]));
        let f = tape.constant(Tensor::vector(vec![5.0]));
        let g = tape.concat(e, f).unwrap();
        assert_eq!(tape.value(g).data(), &[5.0]);
    }

    #[test]
    fn concat_rejects_matrices() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 2]));
        let b = tape.constant(Tensor::vector(vec![1.0]));
        assert!(matches!(tape.concat(a, b), Err(Error::Rank { .. })));
    }

    #[test]
    fn concat_gradient_routes_ones() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::vector(vec![1.0, 2.0]));
        let b = tape.param(Tensor::vector(vec![3.0]));
        let c = tape.concat(a, b).unwrap();
        let s = tape.sum(c).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(a).unwrap().data(), &[1.0, 1.0]);
        assert_eq!(g.get(b).unwrap().data(), &[1.0]);
    }

    #[test]
    fn softmax_values_match_hand_evaluation() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![0.0, 0.0]));
        let y = tape.softmax(x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.5, 0.5]);

        // e^1, e^2, e^3 over their sum.
        let x = tape.constant(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let y = tape.softmax(x).unwrap();
        let expected = [0.09003057317038046, 0.24472847105479764, 0.6652409557748219];
        for (v, e) in tape.value(y).data().iter().zip(expected) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_shift_invariant() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![0.3, -1.2, 2.0]));
        let xs = tape.constant(Tensor::vector(vec![7.6, 6.1, 9.3]));
        let (a, b) = (tape.softmax(x).unwrap(), tape.softmax(xs).unwrap());
        for (p, q) in tape.value(a).data().iter().zip(tape.value(b).data()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_of_empty_is_error() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![]));
        assert!(matches!(tape.softmax(x), Err(Error::Empty(_))));
    }

    #[test]
    fn leaky_relu_cases() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![5.0, -5.0]));
        let y = tape.leaky_relu(x, 0.2).unwrap();
        assert_eq!(tape.value(y).data(), &[5.0, -1.0]);
        let z = tape.constant(Tensor::scalar(-3.0));
        let r = tape.leaky_relu(z, 0.0).unwrap();
        assert_eq!(tape.value(r).data()[0], 0.0);
        assert!(matches!(tape.leaky_relu(x, 1.0), Err(Error::Parameter(_))));
        assert!(matches!(tape.leaky_relu(x, -0.1), Err(Error::Parameter(_))));
    }

    #[test]
    fn kink_subgradient_is_negative_slope() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(0.0));
        let y = tape.leaky_relu(x, 0.2).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.2]);
    }

    #[test]
    fn pointwise_at_zero() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::scalar(0.0));
        let s = tape.sigmoid(x).unwrap();
        let t = tape.tanh(x).unwrap();
        assert_eq!(tape.value(s).data()[0], 0.5);
        assert_eq!(tape.value(t).data()[0], 0.0);
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = Rng::new(1);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![1.0, -2.0, 3.0]));
        let a = tape.dropout(x, 0.0, true, &mut rng).unwrap();
        let b = tape.dropout(x, 0.5, false, &mut rng).unwrap();
        assert_eq!(tape.value(a), tape.value(x));
        assert_eq!(tape.value(b), tape.value(x));
        assert!(matches!(tape.dropout(x, 1.0, true, &mut rng), Err(Error::Parameter(_))));
    }

    #[test]
    fn dropout_law_of_large_numbers() {
        let mut rng = Rng::new(2024);
        let mut tape = Tape::new();
        let n = 10_000;
        let x = tape.constant(Tensor::vector((0..n).map(|i| 1.0 + (i % 7) as f64).collect()));
        let y = tape.dropout(x, 0.5, true, &mut rng).unwrap();
        let survivors = tape.value(y).data().iter().filter(|v| **v != 0.0).count() as f64 / n as f64;
        assert!((0.47..=0.53).contains(&survivors), "{survivors}");
        let mean_in = tape.value(x).sum() / n as f64;
        let mean_out = tape.value(y).sum() / n as f64;
        assert!(((mean_out - mean_in) / mean_in).abs() < 0.05);
    }

    #[test]
    fn cross_entropy_values() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![0.0, 0.0, 0.0]));
        let l = tape.cross_entropy(x, 1).unwrap();
        assert!((tape.value(l).data()[0] - 3f64.ln()).abs() < 1e-12);

        // ln(1 + 2e^-10) ~ 2e^-10 = 9.0799e-5
        let x = tape.constant(Tensor::vector(vec![10.0, 0.0, 0.0]));
        let l = tape.cross_entropy(x, 0).unwrap();
        assert!((tape.value(l).data()[0] - 9.079573746e-5).abs() < 1e-12);

        assert!(matches!(tape.cross_entropy(x, 3), Err(Error::Index { .. })));
    }

    #[test]
    fn backward_sum_and_product() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let s = tape.sum(x).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[1.0, 1.0, 1.0]);

        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(2.0));
        let y = tape.param(Tensor::scalar(3.0));
        let p = tape.mul(x, y).unwrap();
        let g = tape.backward(p).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[3.0]);
        assert_eq!(g.get(y).unwrap().data(), &[2.0]);
    }

    #[test]
    fn backward_accumulates_fan_out() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(3.0));
        let y = tape.mul(x, x).unwrap();
        let z = tape.add(y, x).unwrap();
        let g = tape.backward(z).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[7.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_and_foreign_vars() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0, 2.0]));
        assert!(tape.backward(x).is_err());

        let mut other = Tape::new();
        let y = other.param(Tensor::scalar(1.0));
        assert!(matches!(tape.backward(y), Err(Error::CorruptTape(_))));
    }

    #[test]
    fn unreachable_leaf_gets_zero_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0, 2.0]));
        let y = tape.param(Tensor::scalar(4.0));
        let s = tape.sum(y).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn replay_with_same_seed_is_bitwise_identical() {
        let run = |seed| {
            let mut rng = Rng::new(seed);
            let mut tape = Tape::new();
            let w = tape.param(Tensor::new(vec![3, 2], vec![0.1, -0.4, 0.7, 0.2, -0.3, 0.9]).unwrap());
            let x = tape.constant(Tensor::vector(vec![1.0, 2.0, -1.0]));
            let h = tape.matmul(x, w).unwrap();
            let h = tape.dropout(h, 0.5, true, &mut rng).unwrap();
            let l = tape.cross_entropy(h, 1).unwrap();
            let g = tape.backward(l).unwrap();
            (tape.value(l).data().to_vec(), g.get(w).unwrap().data().to_vec())
        };
        assert_eq!(run(5), run(5));
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(xs in proptest::collection::vec(-30.0f64..30.0, 1..20)) {
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::vector(xs));
            let y = tape.softmax(x).unwrap();
            let v = tape.value(y).data();
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(v.iter().all(|p| *p > 0.0));
        }

        #[test]
        fn concat_slice_round_trip(a in proptest::collection::vec(-5.0f64..5.0, 0..8),
                                   b in proptest::collection::vec(-5.0f64..5.0, 0..8)) {
            let mut tape = Tape::new();
            let (m, n) = (a.len(), b.len());
            let va = tape.param(Tensor::vector(a.clone()));
            let vb = tape.param(Tensor::vector(b.clone()));
            let c = tape.concat(va, vb).unwrap();
            let left = tape.slice(c, 0, m).unwrap();
            let right = tape.slice(c, m, n).unwrap();
            prop_assert_eq!(tape.value(left).data(), &a[..]);
            prop_assert_eq!(tape.value(right).data(), &b[..]);
            let both = tape.concat(left, right).unwrap();
            let s = tape.sum(both).unwrap();
            let g = tape.backward(s).unwrap();
            prop_assert!(g.get(va).unwrap().data().iter().all(|x| *x == 1.0));
            prop_assert!(g.get(vb).unwrap().data().iter().all(|x| *x == 1.0));
        }
    }
}
