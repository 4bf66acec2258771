//! Tape-based reverse-mode differentiation over dense tensors.
//!
//! Every builder method evaluates its node eagerly, so the tape order is a
//! topological order and [`Graph::backward`] is a single reverse sweep.
//!
//! Shape rules:
//! - `add`, `sub`, `mul`, `div`: equal shapes, or either operand has exactly
//!   one element and is broadcast.
//! - `matmul`: `[m,k]x[k,n] -> [m,n]`, `[m,k]x[k] -> [m]`, `[k]x[k,n] -> [n]`,
//!   `[k]x[k] -> [1]`.
//! - `concat`: rank-1 inputs, concatenated end to end.
//! - `stack`: rank-1 inputs of equal length, stacked into `[n, d]` rows.
//! - `softmax`, `log_softmax`: rank-1 input.
//! - `slice`: rank-1 input, contiguous range.
//! - `sum`, `mean`, `min_reduce`, `max_reduce`: any input, output `[1]`.

use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Parameter,
    Constant,
    MatMul,
    Add,
    Sub,
    ElementwiseMul,
    Div,
    Scale,
    Concat,
    Stack,
    Tanh,
    Sigmoid,
    Softmax,
    LogSoftmax,
    Sum,
    Mean,
    Square,
    Log,
    Negate,
    Slice,
    DropoutMaskApply,
    MinReduce,
    MaxReduce,
}

#[derive(Debug, Clone, Copy)]
struct Binding {
    param: ParamId,
    /// `Some(r)` when the leaf is row `r` of a rank-2 parameter.
    row: Option<usize>,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf(Option<Binding>),
    Constant,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Scale(NodeId, f64),
    Concat(Vec<NodeId>),
    Stack(Vec<NodeId>),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Softmax(NodeId),
    LogSoftmax(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    Square(NodeId),
    Log(NodeId),
    Negate(NodeId),
    Slice(NodeId, usize),
    Dropout(NodeId, NodeId),
    /// Input and the index the reduction selected.
    MinReduce(NodeId, usize),
    MaxReduce(NodeId, usize),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf(_) => OpKind::Parameter,
            Op::Constant => OpKind::Constant,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::Mul(..) => OpKind::ElementwiseMul,
            Op::Div(..) => OpKind::Div,
            Op::Scale(..) => OpKind::Scale,
            Op::Concat(_) => OpKind::Concat,
            Op::Stack(_) => OpKind::Stack,
            Op::Tanh(_) => OpKind::Tanh,
            Op::Sigmoid(_) => OpKind::Sigmoid,
            Op::Softmax(_) => OpKind::Softmax,
            Op::LogSoftmax(_) => OpKind::LogSoftmax,
            Op::Sum(_) => OpKind::Sum,
            Op::Mean(_) => OpKind::Mean,
            Op::Square(_) => OpKind::Square,
            Op::Log(_) => OpKind::Log,
            Op::Negate(_) => OpKind::Negate,
            Op::Slice(..) => OpKind::Slice,
            Op::Dropout(..) => OpKind::DropoutMaskApply,
            Op::MinReduce(..) => OpKind::MinReduce,
            Op::MaxReduce(..) => OpKind::MaxReduce,
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
}

/// A single computation graph. Confined to one thread; build one per sentence.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Node-level gradients from one backward sweep.
#[derive(Debug)]
pub struct Backward {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Backward {
    /// ∂loss/∂node, or `None` when the node does not influence the loss.
    pub fn grad(&self, id: NodeId) -> Option<Tensor> {
        self.grads[id.0]
            .as_ref()
            .map(|g| Tensor::new(self.shapes[id.0].clone(), g.clone()).expect("shape recorded"))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_softmax_values(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = x.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    x.iter().map(|v| v - lse).collect()
}

fn broadcast_ok(a: &Tensor, b: &Tensor) -> bool {
    a.shape() == b.shape() || a.len() == 1 || b.len() == 1
}

fn out_shape(a: &Tensor, b: &Tensor) -> Vec<usize> {
    if a.len() >= b.len() {
        a.shape().to_vec()
    } else {
        b.shape().to_vec()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Value of a one-element node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value.item()
    }

    pub fn kind(&self, id: NodeId) -> OpKind {
        self.nodes[id.0].op.kind()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::NumericOverflow {
                op: op_name(op.kind()),
            });
        }
        self.nodes.push(Node { op, value });
        Ok(NodeId(self.nodes.len() - 1))
    }

    fn val(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    // --- leaves ---

    /// Leaf holding a copy of a stored parameter; gradients flow back to it.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        let value = store.get(id).clone();
        self.nodes.push(Node {
            op: Op::Leaf(Some(Binding {
                param: id,
                row: None,
            })),
            value,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Leaf holding row `row` of a rank-2 parameter (embedding lookup).
    pub fn param_row(&mut self, store: &ParamStore, id: ParamId, row: usize) -> Result<NodeId> {
        let table = store.get(id);
        if table.rank() != 2 || row >= table.rows() {
            return Err(Error::contract(format!(
                "row {row} out of range for parameter {} of shape {:?}",
                store.name(id),
                table.shape()
            )));
        }
        let value = Tensor::vector(table.row(row).to_vec());
        self.nodes.push(Node {
            op: Op::Leaf(Some(Binding {
                param: id,
                row: Some(row),
            })),
            value,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// Free differentiable leaf not bound to any stored parameter.
    pub fn variable(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(Op::Leaf(None), value)
    }

    pub fn constant(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(Op::Constant, value)
    }

    // --- binary ---

    fn binary(
        &mut self,
        name: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<NodeId> {
        let (ta, tb) = (self.val(a), self.val(b));
        if !broadcast_ok(ta, tb) {
            return Err(Error::shape(name, ta.shape(), tb.shape()));
        }
        let shape = out_shape(ta, tb);
        let n: usize = shape.iter().product();
        let (da, db) = (ta.data(), tb.data());
        let (sa, sb) = (da.len() > 1 || n == 1, db.len() > 1 || n == 1);
        let data = (0..n)
            .map(|i| f(da[if sa { i } else { 0 }], db[if sb { i } else { 0 }]))
            .collect();
        self.push(op, Tensor::new(shape, data)?)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary("elementwise_mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId> {
        let t = self.val(a);
        let data = t.data().iter().map(|v| v * factor).collect();
        let value = Tensor::new(t.shape().to_vec(), data)?;
        self.push(Op::Scale(a, factor), value)
    }

    /// Elementwise product with an externally supplied mask of the same shape.
    pub fn dropout(&mut self, a: NodeId, mask: NodeId) -> Result<NodeId> {
        let (ta, tm) = (self.val(a), self.val(mask));
        if ta.shape() != tm.shape() {
            return Err(Error::shape("dropout_mask_apply", ta.shape(), tm.shape()));
        }
        let data = ta
            .data()
            .iter()
            .zip(tm.data())
            .map(|(x, m)| x * m)
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(Op::Dropout(a, mask), value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.val(a), self.val(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        let (da, db) = (ta.data(), tb.data());
        let value = match (sa.len(), sb.len()) {
            (2, 2) if sa[1] == sb[0] => {
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let mut out = vec![0.0; m * n];
                for i in 0..m {
                    let row = &da[i * k..(i + 1) * k];
                    let o = &mut out[i * n..(i + 1) * n];
                    for (p, &av) in row.iter().enumerate() {
                        let brow = &db[p * n..(p + 1) * n];
                        for (ov, bv) in o.iter_mut().zip(brow) {
                            *ov += av * bv;
                        }
                    }
                }
                Tensor::new(vec![m, n], out)?
            }
            (2, 1) if sa[1] == sb[0] => {
                let k = sa[1];
                let out = da
                    .chunks_exact(k)
                    .map(|row| row.iter().zip(db).map(|(x, y)| x * y).sum())
                    .collect();
                Tensor::new(vec![sa[0]], out)?
            }
            (1, 2) if sa[0] == sb[0] => {
                let n = sb[1];
                let mut out = vec![0.0; n];
                for (p, &av) in da.iter().enumerate() {
                    for (ov, bv) in out.iter_mut().zip(&db[p * n..(p + 1) * n]) {
                        *ov += av * bv;
                    }
                }
                Tensor::new(vec![n], out)?
            }
            (1, 1) if sa[0] == sb[0] => Tensor::scalar(da.iter().zip(db).map(|(x, y)| x * y).sum()),
            _ => return Err(Error::shape("matmul", sa, sb)),
        };
        self.push(Op::MatMul(a, b), value)
    }

    // --- structural ---

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::contract("concat of zero tensors"));
        }
        let mut data = Vec::new();
        for &p in parts {
            let t = self.val(p);
            if t.rank() != 1 {
                return Err(Error::shape("concat", t.shape(), &[0]));
            }
            data.extend_from_slice(t.data());
        }
        self.push(Op::Concat(parts.to_vec()), Tensor::vector(data))
    }

    pub fn stack(&mut self, rows: &[NodeId]) -> Result<NodeId> {
        if rows.is_empty() {
            return Err(Error::contract("stack of zero tensors"));
        }
        let first = self.val(rows[0]).shape().to_vec();
        if first.len() != 1 {
            return Err(Error::shape("stack", &first, &[0]));
        }
        let mut data = Vec::with_capacity(first[0] * rows.len());
        for &r in rows {
            let t = self.val(r);
            if t.shape() != first.as_slice() {
                return Err(Error::shape("stack", &first, t.shape()));
            }
            data.extend_from_slice(t.data());
        }
        let value = Tensor::new(vec![rows.len(), first[0]], data)?;
        self.push(Op::Stack(rows.to_vec()), value)
    }

    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let t = self.val(a);
        if t.rank() != 1 || len == 0 || start + len > t.len() {
            return Err(Error::shape("slice", t.shape(), &[start, len]));
        }
        let value = Tensor::vector(t.data()[start..start + len].to_vec());
        self.push(Op::Slice(a, start), value)
    }

    /// Element `index` of a rank-1 node as a `[1]` tensor.
    pub fn pick(&mut self, a: NodeId, index: usize) -> Result<NodeId> {
        self.slice(a, index, 1)
    }

    // --- unary ---

    fn unary(&mut self, a: NodeId, f: impl Fn(f64) -> f64, op: Op) -> Result<NodeId> {
        let t = self.val(a);
        let data = t.data().iter().map(|&v| f(v)).collect();
        let value = Tensor::new(t.shape().to_vec(), data)?;
        self.push(op, value)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn square(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, |v| v * v, Op::Square(a))
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, f64::ln, Op::Log(a))
    }

    pub fn negate(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, |v| -v, Op::Negate(a))
    }

    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let t = self.val(a);
        if t.rank() != 1 {
            return Err(Error::shape("softmax", t.shape(), &[0]));
        }
        let data = log_softmax_values(t.data())
            .into_iter()
            .map(f64::exp)
            .collect();
        self.push(Op::Softmax(a), Tensor::vector(data))
    }

    pub fn log_softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let t = self.val(a);
        if t.rank() != 1 {
            return Err(Error::shape("log_softmax", t.shape(), &[0]));
        }
        let data = log_softmax_values(t.data());
        self.push(Op::LogSoftmax(a), Tensor::vector(data))
    }

    // --- reductions ---

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let s = self.val(a).sum();
        self.push(Op::Sum(a), Tensor::scalar(s))
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        let t = self.val(a);
        let m = t.sum() / t.len() as f64;
        self.push(Op::Mean(a), Tensor::scalar(m))
    }

    /// Minimum entry; ties resolve to the lowest index.
    pub fn min_reduce(&mut self, a: NodeId) -> Result<NodeId> {
        let d = self.val(a).data();
        let (idx, v) = d.iter().enumerate().fold(
            (0, d[0]),
            |best, (i, &v)| if v < best.1 { (i, v) } else { best },
        );
        self.push(Op::MinReduce(a, idx), Tensor::scalar(v))
    }

    /// Maximum entry; ties resolve to the lowest index.
    pub fn max_reduce(&mut self, a: NodeId) -> Result<NodeId> {
        let d = self.val(a).data();
        let (idx, v) = d.iter().enumerate().fold(
            (0, d[0]),
            |best, (i, &v)| if v > best.1 { (i, v) } else { best },
        );
        self.push(Op::MaxReduce(a, idx), Tensor::scalar(v))
    }

    // --- backward ---

    fn propagate(&self, loss: NodeId) -> Result<Vec<Option<Vec<f64>>>> {
        let lv = self.val(loss);
        if lv.len() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let out = node.value.data();
            match &node.op {
                Op::Leaf(_) | Op::Constant => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(node.op, Op::Sub(..)) {
                        -1.0
                    } else {
                        1.0
                    };
                    self.acc_broadcast(&mut grads, *a, &g, |gi, _| gi);
                    self.acc_broadcast(&mut grads, *b, &g, |gi, _| sign * gi);
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    let (va, vb) = (self.val(a).data(), self.val(b).data());
                    let pick = |d: &[f64], k: usize| if d.len() == 1 { d[0] } else { d[k] };
                    self.acc_broadcast(&mut grads, a, &g, |gi, k| gi * pick(vb, k));
                    self.acc_broadcast(&mut grads, b, &g, |gi, k| gi * pick(va, k));
                }
                Op::Div(a, b) => {
                    let (a, b) = (*a, *b);
                    let (va, vb) = (self.val(a).data(), self.val(b).data());
                    let pick = |d: &[f64], k: usize| if d.len() == 1 { d[0] } else { d[k] };
                    self.acc_broadcast(&mut grads, a, &g, |gi, k| gi / pick(vb, k));
                    self.acc_broadcast(&mut grads, b, &g, |gi, k| {
                        let y = pick(vb, k);
                        -gi * pick(va, k) / (y * y)
                    });
                }
                Op::Scale(a, f) => {
                    let f = *f;
                    self.acc_map(&mut grads, *a, &g, |_, gi| gi * f);
                }
                Op::Dropout(a, m) => {
                    let mask = self.val(*m).data();
                    self.acc_map(&mut grads, *a, &g, |k, gi| gi * mask[k]);
                }
                Op::MatMul(a, b) => self.matmul_backward(&mut grads, *a, *b, &g),
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.val(p).len();
                        let seg = &g[off..off + n];
                        self.acc_map(&mut grads, p, seg, |_, gi| gi);
                        off += n;
                    }
                }
                Op::Stack(rows) => {
                    let d = self.val(rows[0]).len();
                    for (r, &p) in rows.iter().enumerate() {
                        self.acc_map(&mut grads, p, &g[r * d..(r + 1) * d], |_, gi| gi);
                    }
                }
                Op::Slice(a, start) => {
                    let a = *a;
                    let n = self.val(a).len();
                    let start = *start;
                    let slot = grads[a.0].get_or_insert_with(|| vec![0.0; n]);
                    for (k, gi) in g.iter().enumerate() {
                        slot[start + k] += gi;
                    }
                }
                Op::Tanh(a) => {
                    self.acc_map(&mut grads, *a, &g, |k, gi| gi * (1.0 - out[k] * out[k]))
                }
                Op::Sigmoid(a) => {
                    self.acc_map(&mut grads, *a, &g, |k, gi| gi * out[k] * (1.0 - out[k]))
                }
                Op::Square(a) => {
                    let x = self.val(*a).data();
                    self.acc_map(&mut grads, *a, &g, |k, gi| 2.0 * x[k] * gi);
                }
                Op::Log(a) => {
                    let x = self.val(*a).data();
                    self.acc_map(&mut grads, *a, &g, |k, gi| gi / x[k]);
                }
                Op::Negate(a) => self.acc_map(&mut grads, *a, &g, |_, gi| -gi),
                Op::Softmax(a) => {
                    let dot: f64 = g.iter().zip(out).map(|(gi, y)| gi * y).sum();
                    self.acc_map(&mut grads, *a, &g, |k, gi| out[k] * (gi - dot));
                }
                Op::LogSoftmax(a) => {
                    let total: f64 = g.iter().sum();
                    self.acc_map(&mut grads, *a, &g, |k, gi| gi - out[k].exp() * total);
                }
                Op::Sum(a) => {
                    let g0 = g[0];
                    self.acc_map_len(&mut grads, *a, |_| g0);
                }
                Op::Mean(a) => {
                    let n = self.val(*a).len() as f64;
                    let g0 = g[0] / n;
                    self.acc_map_len(&mut grads, *a, |_| g0);
                }
                Op::MinReduce(a, idx) | Op::MaxReduce(a, idx) => {
                    let n = self.val(*a).len();
                    let slot = grads[a.0].get_or_insert_with(|| vec![0.0; n]);
                    slot[*idx] += g[0];
                }
            }
            grads[i] = Some(g);
        }
        Ok(grads)
    }

    fn acc_map(
        &self,
        grads: &mut [Option<Vec<f64>>],
        target: NodeId,
        g: &[f64],
        f: impl Fn(usize, f64) -> f64,
    ) {
        let slot = grads[target.0].get_or_insert_with(|| vec![0.0; g.len()]);
        for (k, (s, &gi)) in slot.iter_mut().zip(g).enumerate() {
            *s += f(k, gi);
        }
    }

    fn acc_map_len(
        &self,
        grads: &mut [Option<Vec<f64>>],
        target: NodeId,
        f: impl Fn(usize) -> f64,
    ) {
        let n = self.val(target).len();
        let slot = grads[target.0].get_or_insert_with(|| vec![0.0; n]);
        for (k, s) in slot.iter_mut().enumerate() {
            *s += f(k);
        }
    }

    /// Accumulates `f(g_k, k)` into `target`, summing over broadcast positions.
    fn acc_broadcast(
        &self,
        grads: &mut [Option<Vec<f64>>],
        target: NodeId,
        g: &[f64],
        f: impl Fn(f64, usize) -> f64,
    ) {
        let n = self.val(target).len();
        let slot = grads[target.0].get_or_insert_with(|| vec![0.0; n]);
        if n == g.len() {
            for (k, (s, &gi)) in slot.iter_mut().zip(g).enumerate() {
                *s += f(gi, k);
            }
        } else {
            slot[0] += g.iter().enumerate().map(|(k, &gi)| f(gi, k)).sum::<f64>();
        }
    }

    fn matmul_backward(&self, grads: &mut [Option<Vec<f64>>], a: NodeId, b: NodeId, g: &[f64]) {
        let (ta, tb) = (self.val(a), self.val(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        let (da, db) = (ta.data(), tb.data());
        match (sa.len(), sb.len()) {
            (2, 2) => {
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let ga = grads[a.0].get_or_insert_with(|| vec![0.0; m * k]);
                for i in 0..m {
                    let gr = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let brow = &db[p * n..(p + 1) * n];
                        ga[i * k + p] += gr.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                    }
                }
                let gb = grads[b.0].get_or_insert_with(|| vec![0.0; k * n]);
                for i in 0..m {
                    let gr = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let av = da[i * k + p];
                        for (gbv, gv) in gb[p * n..(p + 1) * n].iter_mut().zip(gr) {
                            *gbv += av * gv;
                        }
                    }
                }
            }
            (2, 1) => {
                let (m, k) = (sa[0], sa[1]);
                let ga = grads[a.0].get_or_insert_with(|| vec![0.0; m * k]);
                for (i, &gi) in g.iter().enumerate() {
                    if gi != 0.0 {
                        for (gav, xv) in ga[i * k..(i + 1) * k].iter_mut().zip(db) {
                            *gav += gi * xv;
                        }
                    }
                }
                let gb = grads[b.0].get_or_insert_with(|| vec![0.0; k]);
                for (i, &gi) in g.iter().enumerate() {
                    if gi != 0.0 {
                        for (gbv, av) in gb.iter_mut().zip(&da[i * k..(i + 1) * k]) {
                            *gbv += gi * av;
                        }
                    }
                }
            }
            (1, 2) => {
                let (k, n) = (sb[0], sb[1]);
                let ga = grads[a.0].get_or_insert_with(|| vec![0.0; k]);
                for p in 0..k {
                    ga[p] += g
                        .iter()
                        .zip(&db[p * n..(p + 1) * n])
                        .map(|(x, y)| x * y)
                        .sum::<f64>();
                }
                let gb = grads[b.0].get_or_insert_with(|| vec![0.0; k * n]);
                for p in 0..k {
                    for (gbv, gv) in gb[p * n..(p + 1) * n].iter_mut().zip(g) {
                        *gbv += da[p] * gv;
                    }
                }
            }
            _ => {
                let g0 = g[0];
                let ga = grads[a.0].get_or_insert_with(|| vec![0.0; da.len()]);
                for (s, y) in ga.iter_mut().zip(db) {
                    *s += g0 * y;
                }
                let gb = grads[b.0].get_or_insert_with(|| vec![0.0; db.len()]);
                for (s, x) in gb.iter_mut().zip(da) {
                    *s += g0 * x;
                }
            }
        }
    }

    /// Runs the reverse sweep and returns gradients for every node.
    pub fn backward(&self, loss: NodeId) -> Result<Backward> {
        let grads = self.propagate(loss)?;
        let shapes = self.nodes[..grads.len()]
            .iter()
            .map(|n| n.value.shape().to_vec())
            .collect();
        Ok(Backward { grads, shapes })
    }

    /// Runs the reverse sweep and adds `scale · ∂loss/∂θ` into `out` for every
    /// stored parameter reachable from `loss`.
    pub fn backward_into(
        &self,
        loss: NodeId,
        store: &ParamStore,
        out: &mut Gradients,
        scale: f64,
    ) -> Result<()> {
        let grads = self.propagate(loss)?;
        for (i, g) in grads.iter().enumerate() {
            let (Some(g), Op::Leaf(Some(bind))) = (g, &self.nodes[i].op) else {
                continue;
            };
            let slot = out.slot(bind.param, store.get(bind.param).shape());
            let dst = match bind.row {
                Some(r) => slot.row_mut(r),
                None => slot.data_mut(),
            };
            for (d, gi) in dst.iter_mut().zip(g) {
                *d += scale * gi;
            }
        }
        Ok(())
    }

    /// Convenience wrapper around [`Graph::backward_into`] with unit scale.
    pub fn param_gradients(&self, loss: NodeId, store: &ParamStore) -> Result<Gradients> {
        let mut out = Gradients::for_store(store);
        self.backward_into(loss, store, &mut out, 1.0)?;
        Ok(out)
    }
}

pub(crate) fn op_name(kind: OpKind) -> &'static str {
    match kind {
        OpKind::Parameter => "parameter",
        OpKind::Constant => "constant",
        OpKind::MatMul => "matmul",
        OpKind::Add => "add",
        OpKind::Sub => "sub",
        OpKind::ElementwiseMul => "elementwise_mul",
        OpKind::Div => "div",
        OpKind::Scale => "scale",
        OpKind::Concat => "concat",
        OpKind::Stack => "stack",
        OpKind::Tanh => "tanh",
        OpKind::Sigmoid => "sigmoid",
        OpKind::Softmax => "softmax",
        OpKind::LogSoftmax => "log_softmax",
        OpKind::Sum => "sum",
        OpKind::Mean => "mean",
        OpKind::Square => "square",
        OpKind::Log => "log",
        OpKind::Negate => "negate",
        OpKind::Slice => "slice",
        OpKind::DropoutMaskApply => "dropout_mask_apply",
        OpKind::MinReduce => "min_reduce",
        OpKind::MaxReduce => "max_reduce",
    }
}
