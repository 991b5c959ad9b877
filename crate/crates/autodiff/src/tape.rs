use crate::tensor::{axpy, gemm_acc, matmul_into, transpose};
use crate::{AdError, ParamId, ParamStore, Result, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Const,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Scale(NodeId, f64),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Exp(NodeId),
    Clamp(NodeId, f64, f64),
    Concat(Vec<NodeId>),
    Slice(NodeId, usize),
    Sum(NodeId),
    Mse(NodeId, NodeId),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Const => "const",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Scale(..) => "scale",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Exp(_) => "exp",
            Op::Clamp(..) => "clamp",
            Op::Concat(_) => "concat",
            Op::Slice(..) => "slice",
            Op::Sum(_) => "sum",
            Op::Mse(..) => "mse",
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only record of a forward computation.
///
/// Node ids are handed out in creation order, so the node list is already a
/// topological order and the backward pass simply walks it in reverse. A tape
/// has a single writer; independent tapes can live on different threads.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    first_nonfinite: Option<(NodeId, &'static str)>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
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

    /// First node whose forward value contained a NaN or infinity. Only
    /// tracked in builds with debug assertions; release builds check at the
    /// loss instead.
    pub fn first_nonfinite(&self) -> Option<(NodeId, &'static str)> {
        self.first_nonfinite
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        let id = NodeId(self.nodes.len());
        if cfg!(debug_assertions) && self.first_nonfinite.is_none() && !value.is_finite() {
            self.first_nonfinite = Some((id, op.name()));
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        id
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }

    /// Records a tensor that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Const, false)
    }

    /// Records the current value of a trainable parameter. Gradients reaching
    /// this node are accumulated into the store by [`Tape::backward`].
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        self.push(store.value(id).clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(AdError::ShapeMismatch {
                op: "matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let mut out = vec![0.0; sa.0 * sb.1];
        matmul_into(&self.nodes[a.0].value, &self.nodes[b.0].value, &mut out);
        let value = Tensor::from_vec(sa.0, sb.1, out)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// Elementwise sum with broadcasting: along each axis the operands must
    /// agree or one of them must have extent 1.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.broadcast("add", a, b, |x, y| x + y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    /// Elementwise product, broadcasting like [`Tape::add`].
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.broadcast("mul", a, b, |x, y| x * y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    /// Elementwise quotient, broadcasting like [`Tape::add`].
    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.broadcast("div", a, b, |x, y| x / y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Div(a, b), rg))
    }

    fn broadcast(&self, op: &'static str, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let (m, n) = broadcast_shape(sa, sb).ok_or(AdError::ShapeMismatch { op, lhs: sa, rhs: sb })?;
        let va = self.nodes[a.0].value.data();
        let vb = self.nodes[b.0].value.data();
        if sa == sb {
            let data = va.iter().zip(vb).map(|(&x, &y)| f(x, y)).collect();
            return Tensor::from_vec(m, n, data);
        }
        let mut data = Vec::with_capacity(m * n);
        for i in 0..m {
            for j in 0..n {
                data.push(f(va[bidx(sa, i, j)], vb[bidx(sb, i, j)]));
            }
        }
        Tensor::from_vec(m, n, data)
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let value = self.nodes[a.0].value.map(|x| factor * x);
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, factor), rg)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.map(f64::tanh);
        let rg = self.rg(a);
        self.push(value, Op::Tanh(a), rg)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.map(sigmoid);
        let rg = self.rg(a);
        self.push(value, Op::Sigmoid(a), rg)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.map(f64::exp);
        let rg = self.rg(a);
        self.push(value, Op::Exp(a), rg)
    }

    /// Elementwise clamp to `[lo, hi]`; the gradient is zero where the input
    /// lies strictly outside the interval.
    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let value = self.nodes[a.0].value.map(|x| x.clamp(lo, hi));
        let rg = self.rg(a);
        self.push(value, Op::Clamp(a, lo, hi), rg)
    }

    /// Stacks column-compatible tensors along the row axis.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let Some(&first) = parts.first() else {
            return Err(AdError::InvalidArgument("concat of zero tensors".into()));
        };
        let cols = self.shape(first).1;
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let s = self.shape(p);
            if s.1 != cols {
                return Err(AdError::ShapeMismatch {
                    op: "concat",
                    lhs: self.shape(first),
                    rhs: s,
                });
            }
            rows += s.0;
            data.extend_from_slice(self.nodes[p.0].value.data());
        }
        let value = Tensor::from_vec(rows, cols, data)?;
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(value, Op::Concat(parts.to_vec()), rg))
    }

    /// Rows `start..start + len` of `a`.
    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let (rows, cols) = self.shape(a);
        if len == 0 || start + len > rows {
            return Err(AdError::ShapeMismatch {
                op: "slice",
                lhs: (rows, cols),
                rhs: (start, len),
            });
        }
        let data = self.nodes[a.0].value.data()[start * cols..(start + len) * cols].to_vec();
        let value = Tensor::from_vec(len, cols, data)?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::Slice(a, start), rg))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.nodes[a.0].value.data().iter().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    /// Mean of squared differences over all entries.
    pub fn mse(&mut self, pred: NodeId, target: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(pred), self.shape(target));
        if sa != sb {
            return Err(AdError::ShapeMismatch {
                op: "mse",
                lhs: sa,
                rhs: sb,
            });
        }
        let a = self.nodes[pred.0].value.data();
        let b = self.nodes[target.0].value.data();
        let n = a.len() as f64;
        let s = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n;
        let rg = self.rg(pred) || self.rg(target);
        Ok(self.push(Tensor::scalar(s), Op::Mse(pred, target), rg))
    }

    /// Reverse pass from a scalar `loss`, accumulating `dloss/dparam` into the
    /// gradient slots of `store`. Contributions from every use of a node are
    /// summed.
    pub fn backward(&self, loss: NodeId, store: &mut ParamStore) -> Result<()> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(AdError::NonScalarLoss(shape));
        }
        if !self.nodes[loss.0].value.is_finite() {
            return Err(AdError::NonFinite {
                op: "loss",
                context: format!("node {}", loss.0),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else {
                continue;
            };
            match &node.op {
                Op::Const => {}
                Op::Param(pid) => {
                    let dst = store.grad_mut(*pid);
                    assert_eq!(dst.len(), g.len(), "parameter gradient shape");
                    axpy(1.0, &g, dst.data_mut());
                }
                Op::MatMul(a, b) => {
                    let va = &self.nodes[a.0].value;
                    let vb = &self.nodes[b.0].value;
                    let (m, k) = va.shape();
                    let n = vb.cols();
                    if self.rg(*a) {
                        let ga = slot(&mut grads, *a, m * k);
                        if n == 1 {
                            for r in 0..m {
                                axpy(g[r], vb.data(), &mut ga[r * k..(r + 1) * k]);
                            }
                        } else {
                            let bt = transpose(k, n, vb.data());
                            gemm_acc(m, n, k, &g, &bt, ga);
                        }
                    }
                    if self.rg(*b) {
                        let gb = slot(&mut grads, *b, k * n);
                        if n == 1 {
                            for r in 0..m {
                                axpy(g[r], &va.data()[r * k..(r + 1) * k], gb);
                            }
                        } else {
                            let at = transpose(m, k, va.data());
                            gemm_acc(k, m, n, &at, &g, gb);
                        }
                    }
                }
                Op::Add(a, b) => {
                    let out = node.value.shape();
                    for x in [*a, *b] {
                        if !self.rg(x) {
                            continue;
                        }
                        let sx = self.shape(x);
                        let gx = slot(&mut grads, x, sx.0 * sx.1);
                        if sx == out {
                            axpy(1.0, &g, gx);
                        } else {
                            for i in 0..out.0 {
                                for j in 0..out.1 {
                                    gx[bidx(sx, i, j)] += g[i * out.1 + j];
                                }
                            }
                        }
                    }
                }
                Op::Mul(a, b) => {
                    let out = node.value.shape();
                    let va = &self.nodes[a.0].value;
                    let vb = &self.nodes[b.0].value;
                    for (x, other) in [(*a, vb), (*b, va)] {
                        if !self.rg(x) {
                            continue;
                        }
                        let sx = self.shape(x);
                        let so = other.shape();
                        let gx = slot(&mut grads, x, sx.0 * sx.1);
                        if sx == out && so == out {
                            for ((d, gi), o) in gx.iter_mut().zip(&g).zip(other.data()) {
                                *d += gi * o;
                            }
                        } else {
                            let od = other.data();
                            for i in 0..out.0 {
                                for j in 0..out.1 {
                                    gx[bidx(sx, i, j)] += g[i * out.1 + j] * od[bidx(so, i, j)];
                                }
                            }
                        }
                    }
                }
                Op::Div(a, b) => {
                    let out = node.value.shape();
                    let (sa, sb) = (self.shape(*a), self.shape(*b));
                    let vb = self.nodes[b.0].value.data();
                    if self.rg(*a) {
                        let ga = slot(&mut grads, *a, sa.0 * sa.1);
                        for i in 0..out.0 {
                            for j in 0..out.1 {
                                ga[bidx(sa, i, j)] += g[i * out.1 + j] / vb[bidx(sb, i, j)];
                            }
                        }
                    }
                    if self.rg(*b) {
                        let y = node.value.data();
                        let gb = slot(&mut grads, *b, sb.0 * sb.1);
                        for i in 0..out.0 {
                            for j in 0..out.1 {
                                let k = i * out.1 + j;
                                gb[bidx(sb, i, j)] -= g[k] * y[k] / vb[bidx(sb, i, j)];
                            }
                        }
                    }
                }
                Op::Scale(a, f) => {
                    if self.rg(*a) {
                        axpy(*f, &g, slot(&mut grads, *a, g.len()));
                    }
                }
                Op::Tanh(a) => {
                    let y = node.value.data();
                    let ga = slot(&mut grads, *a, g.len());
                    for ((d, gi), yi) in ga.iter_mut().zip(&g).zip(y) {
                        *d += gi * (1.0 - yi * yi);
                    }
                }
                Op::Sigmoid(a) => {
                    let y = node.value.data();
                    let ga = slot(&mut grads, *a, g.len());
                    for ((d, gi), yi) in ga.iter_mut().zip(&g).zip(y) {
                        *d += gi * yi * (1.0 - yi);
                    }
                }
                Op::Exp(a) => {
                    let y = node.value.data();
                    let ga = slot(&mut grads, *a, g.len());
                    for ((d, gi), yi) in ga.iter_mut().zip(&g).zip(y) {
                        *d += gi * yi;
                    }
                }
                Op::Clamp(a, lo, hi) => {
                    let x = self.nodes[a.0].value.data();
                    let ga = slot(&mut grads, *a, g.len());
                    for ((d, gi), xi) in ga.iter_mut().zip(&g).zip(x) {
                        if *xi >= *lo && *xi <= *hi {
                            *d += gi;
                        }
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.nodes[p.0].value.len();
                        if self.rg(p) {
                            axpy(1.0, &g[offset..offset + len], slot(&mut grads, p, len));
                        }
                        offset += len;
                    }
                }
                Op::Slice(a, start) => {
                    let va = &self.nodes[a.0].value;
                    let off = start * va.cols();
                    let ga = slot(&mut grads, *a, va.len());
                    axpy(1.0, &g, &mut ga[off..off + g.len()]);
                }
                Op::Sum(a) => {
                    let len = self.nodes[a.0].value.len();
                    let ga = slot(&mut grads, *a, len);
                    ga.iter_mut().for_each(|d| *d += g[0]);
                }
                Op::Mse(p, t) => {
                    let vp = self.nodes[p.0].value.data();
                    let vt = self.nodes[t.0].value.data();
                    let c = 2.0 * g[0] / vp.len() as f64;
                    let diff: Vec<f64> = vp.iter().zip(vt).map(|(a, b)| c * (a - b)).collect();
                    if self.rg(*p) {
                        axpy(1.0, &diff, slot(&mut grads, *p, diff.len()));
                    }
                    if self.rg(*t) {
                        axpy(-1.0, &diff, slot(&mut grads, *t, diff.len()));
                    }
                }
            }
        }
        Ok(())
    }
}

fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> Option<(usize, usize)> {
    let axis = |x: usize, y: usize| match (x, y) {
        _ if x == y => Some(x),
        (1, _) => Some(y),
        (_, 1) => Some(x),
        _ => None,
    };
    Some((axis(a.0, b.0)?, axis(a.1, b.1)?))
}

/// Flat index into an operand of shape `s` for output element `(i, j)`.
#[inline]
fn bidx(s: (usize, usize), i: usize, j: usize) -> usize {
    let r = if s.0 == 1 { 0 } else { i };
    let c = if s.1 == 1 { 0 } else { j };
    r * s.1 + c
}

fn slot(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut [f64] {
    grads[id.0].get_or_insert_with(|| vec![0.0; len])
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
