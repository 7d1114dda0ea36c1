//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] is an append-only list of nodes. Every operation evaluates its
//! result eagerly, stores it as a new node and remembers its parents, so the
//! node list is topologically ordered by construction. [`Tape::backward`]
//! walks the list once in reverse and accumulates `d(loss)/d(node)` for every
//! node that depends on a parameter.
//!
//! A tape supports exactly one backward pass. Build a fresh tape per
//! optimisation step; a second call returns [`Error::TapeConsumed`] instead of
//! silently accumulating into stale gradients.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{self, broadcast_shape, numel, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Matmul(Var, Var),
    Bmm { a: Var, b: Var, transpose_b: bool },
    Softmax(Var),
    Sum(Var),
    Mean(Var),
    Reshape(Var),
    SliceLast { src: Var, start: usize },
    ConcatLast(Vec<Var>),
    Step { src: Var, t: usize },
    Stack(Vec<Var>),
    LayerNorm { src: Var, inv_std: Vec<f64> },
    Conv1d { x: Var, w: Var },
    MaxPool { src: Var, argmax: Vec<usize> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients produced by one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` when the node does not depend on any parameter or received no
    /// gradient from the loss.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Gradient of `var`, or zeros of `like`'s shape if none flowed to it.
    pub fn get_or_zeros(&self, var: Var, like: &Tensor) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like.shape().to_vec()))
    }
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// A trainable leaf: gradients flow to it.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A non-trainable leaf (inputs, targets).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn binary(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        node: Op,
    ) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let shape = broadcast_shape(av.shape(), bv.shape()).ok_or_else(|| Error::Shape {
            op,
            left: av.shape().to_vec(),
            right: bv.shape().to_vec(),
        })?;
        let n = numel(&shape);
        let (ad, bd) = (av.data(), bv.data());
        let (la, lb) = (ad.len().max(1), bd.len().max(1));
        let data = (0..n).map(|i| f(ad[i % la], bd[i % lb])).collect();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::from_parts(shape, data), node, rg))
    }

    /// Elementwise sum; the shorter shape must be a suffix of the longer one.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a).map(|v| v * k);
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, k), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(tensor::tanh);
        let rg = self.rg(a);
        self.push(value, Op::Tanh(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(tensor::sigmoid);
        let rg = self.rg(a);
        self.push(value, Op::Sigmoid(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(tensor::relu);
        let rg = self.rg(a);
        self.push(value, Op::Relu(a), rg)
    }

    /// `[.., k] x [k, n] -> [.., n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = tensor::matmul(self.value(a), self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Matmul(a, b), rg))
    }

    /// Batched product `[B, m, k] x [B, k, n]`, or `[B, m, k] x [B, n, k]^T`
    /// when `transpose_b` is set.
    pub fn bmm(&mut self, a: Var, b: Var, transpose_b: bool) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let mismatch = || Error::Shape {
            op: "bmm",
            left: sa.to_vec(),
            right: sb.to_vec(),
        };
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] {
            return Err(mismatch());
        }
        let (batch, m, k) = (sa[0], sa[1], sa[2]);
        let (kb, n) = if transpose_b {
            (sb[2], sb[1])
        } else {
            (sb[1], sb[2])
        };
        if kb != k {
            return Err(mismatch());
        }
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![0.0; batch * m * n];
        for i in 0..batch {
            let (ab, bb) = (
                &ad[i * m * k..(i + 1) * m * k],
                &bd[i * k * n..(i + 1) * k * n],
            );
            let ob = &mut out[i * m * n..(i + 1) * m * n];
            if transpose_b {
                tensor::gemm_bt(ab, bb, ob, m, k, n);
            } else {
                tensor::gemm(ab, bb, ob, m, k, n);
            }
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(
            Tensor::from_parts(vec![batch, m, n], out),
            Op::Bmm { a, b, transpose_b },
            rg,
        ))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Var {
        let value = tensor::softmax(self.value(a));
        let rg = self.rg(a);
        self.push(value, Op::Softmax(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(value, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(Error::Empty("mean of an empty tensor"));
        }
        let value = Tensor::scalar(t.sum() / t.len() as f64);
        let rg = self.rg(a);
        Ok(self.push(value, Op::Mean(a), rg))
    }

    pub fn reshape(&mut self, a: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        let value = self.value(a).reshape(shape)?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::Reshape(a), rg))
    }

    /// Columns `[start, start + len)` of the last axis.
    pub fn slice_last(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a);
        let d = t.last_dim();
        if start + len > d {
            return Err(Error::Invalid(alloc::format!(
                "slice {start}..{} exceeds last dimension {d}",
                start + len
            )));
        }
        let mut data = Vec::with_capacity(t.len() / d.max(1) * len);
        for row in t.data().chunks(d) {
            data.extend_from_slice(&row[start..start + len]);
        }
        let mut shape = t.shape().to_vec();
        *shape.last_mut().unwrap() = len;
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::from_parts(shape, data),
            Op::SliceLast { src: a, start },
            rg,
        ))
    }

    /// Concatenates along the last axis; leading dimensions must agree.
    pub fn concat_last(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::Empty("concat of no tensors"))?;
        let lead = &self.shape(first)[..self.shape(first).len() - 1];
        let mut width = 0;
        for &p in parts {
            let s = self.shape(p);
            if &s[..s.len() - 1] != lead {
                return Err(Error::Shape {
                    op: "concat_last",
                    left: self.shape(first).to_vec(),
                    right: s.to_vec(),
                });
            }
            width += s[s.len() - 1];
        }
        let rows = numel(lead);
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            for &p in parts {
                let t = self.value(p);
                let d = t.last_dim();
                data.extend_from_slice(&t.data()[r * d..(r + 1) * d]);
            }
        }
        let mut shape = lead.to_vec();
        shape.push(width);
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(
            Tensor::from_parts(shape, data),
            Op::ConcatLast(parts.to_vec()),
            rg,
        ))
    }

    /// Time step `t` of a `[n, T, d]` sequence batch, as `[n, d]`.
    pub fn step(&mut self, a: Var, t: usize) -> Result<Var> {
        let s = self.shape(a);
        if s.len() != 3 || t >= s[1] {
            return Err(Error::Invalid(alloc::format!(
                "cannot take step {t} of shape {s:?}"
            )));
        }
        let (n, steps, d) = (s[0], s[1], s[2]);
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            let off = (i * steps + t) * d;
            data.extend_from_slice(&src[off..off + d]);
        }
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::from_parts(vec![n, d], data),
            Op::Step { src: a, t },
            rg,
        ))
    }

    /// Stacks `k` tensors of shape `[n, d]` into `[n, k, d]`.
    pub fn stack_steps(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::Empty("stack of no tensors"))?;
        let s0 = self.shape(first).to_vec();
        if s0.len() != 2 {
            return Err(Error::Invalid(alloc::format!(
                "stack expects rank-2 parts, got {s0:?}"
            )));
        }
        for &p in parts {
            if self.shape(p) != s0.as_slice() {
                return Err(Error::Shape {
                    op: "stack_steps",
                    left: s0,
                    right: self.shape(p).to_vec(),
                });
            }
        }
        let (n, d, k) = (s0[0], s0[1], parts.len());
        let mut data = vec![0.0; n * k * d];
        for (t, &p) in parts.iter().enumerate() {
            let src = self.value(p).data();
            for i in 0..n {
                data[(i * k + t) * d..(i * k + t + 1) * d]
                    .copy_from_slice(&src[i * d..(i + 1) * d]);
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(
            Tensor::from_parts(vec![n, k, d], data),
            Op::Stack(parts.to_vec()),
            rg,
        ))
    }

    /// Normalizes each slice of the last axis to zero mean and unit variance
    /// (`(x - mean) / sqrt(var + eps)`, population variance). No affine part.
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Var {
        let t = self.value(a);
        let d = t.last_dim().max(1);
        let mut out = t.data().to_vec();
        let mut inv_std = Vec::with_capacity(out.len() / d);
        for row in out.chunks_mut(d) {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / libm::sqrt(var + eps);
            for v in row.iter_mut() {
                *v = (*v - mean) * inv;
            }
            inv_std.push(inv);
        }
        let value = Tensor::from_parts(t.shape().to_vec(), out);
        let rg = self.rg(a);
        self.push(value, Op::LayerNorm { src: a, inv_std }, rg)
    }

    /// Cross-correlation along time of `x: [n, T, C]` with `w: [F, C, K]`,
    /// zero-padded on the right by `K - 1` so the output is `[n, T, F]`.
    pub fn conv1d_same(&mut self, x: Var, w: Var) -> Result<Var> {
        let (sx, sw) = (self.shape(x), self.shape(w));
        if sx.len() != 3 || sw.len() != 3 || sx[2] != sw[1] || sw[2] == 0 {
            return Err(Error::Shape {
                op: "conv1d",
                left: sx.to_vec(),
                right: sw.to_vec(),
            });
        }
        let (n, steps, c) = (sx[0], sx[1], sx[2]);
        let (f, k) = (sw[0], sw[2]);
        let (xd, wd) = (self.value(x).data(), self.value(w).data());
        let mut out = vec![0.0; n * steps * f];
        for i in 0..n {
            for t in 0..steps {
                let o = &mut out[(i * steps + t) * f..(i * steps + t + 1) * f];
                for j in 0..k.min(steps - t) {
                    let xr = &xd[(i * steps + t + j) * c..(i * steps + t + j + 1) * c];
                    for (fi, ov) in o.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for (ci, &xv) in xr.iter().enumerate() {
                            acc += wd[(fi * c + ci) * k + j] * xv;
                        }
                        *ov += acc;
                    }
                }
            }
        }
        let rg = self.rg(x) || self.rg(w);
        Ok(self.push(
            Tensor::from_parts(vec![n, steps, f], out),
            Op::Conv1d { x, w },
            rg,
        ))
    }

    /// Non-overlapping max pooling over the time axis of `[n, T, C]`
    /// (stride = `pool`, trailing partial window dropped).
    pub fn max_pool_time(&mut self, a: Var, pool: usize) -> Result<Var> {
        let s = self.shape(a);
        if s.len() != 3 {
            return Err(Error::Invalid(alloc::format!(
                "max pool expects [n, T, C], got {s:?}"
            )));
        }
        let (n, steps, c) = (s[0], s[1], s[2]);
        if pool == 0 || pool > steps {
            return Err(Error::Invalid(alloc::format!(
                "pool size {pool} must be in 1..={steps}"
            )));
        }
        let out_steps = steps / pool;
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(n * out_steps * c);
        let mut argmax = Vec::with_capacity(n * out_steps * c);
        for i in 0..n {
            for w in 0..out_steps {
                for ch in 0..c {
                    let mut best = (i * steps + w * pool) * c + ch;
                    for t in 1..pool {
                        let idx = (i * steps + w * pool + t) * c + ch;
                        if src[idx] > src[best] {
                            best = idx;
                        }
                    }
                    data.push(src[best]);
                    argmax.push(best);
                }
            }
        }
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::from_parts(vec![n, out_steps, c], data),
            Op::MaxPool { src: a, argmax },
            rg,
        ))
    }

    /// Accumulates `d(loss)/d(node)` for every node that depends on a
    /// parameter. `loss` must hold exactly one element.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        let loss_value = self.value(loss);
        if loss_value.len() != 1 {
            return Err(Error::NonScalarLoss {
                shape: loss_value.shape().to_vec(),
            });
        }
        self.consumed = true;

        let mut grads: Vec<Option<Vec<f64>>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        if self.rg(loss) {
            grads[loss.0] = Some(vec![1.0]);
        }

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            self.propagate(node, &g, &mut grads);
            grads[id] = Some(g);
        }

        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, node)| g.map(|g| Tensor::from_parts(node.value.shape().to_vec(), g)))
            .collect();
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        // Returns the gradient buffer of `v`, or None if `v` needs no gradient.
        macro_rules! slot {
            ($v:expr) => {{
                let v: Var = $v;
                if nodes[v.0].requires_grad {
                    Some(
                        grads[v.0]
                            .get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()])
                            .as_mut_slice(),
                    )
                } else {
                    None
                }
            }};
        }
        let val = |v: Var| nodes[v.0].value.data();
        let y = node.value.data();

        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) {
                    -1.0
                } else {
                    1.0
                };
                if let Some(ga) = slot!(*a) {
                    let la = ga.len().max(1);
                    for (i, gi) in g.iter().enumerate() {
                        ga[i % la] += gi;
                    }
                }
                if let Some(gb) = slot!(*b) {
                    let lb = gb.len().max(1);
                    for (i, gi) in g.iter().enumerate() {
                        gb[i % lb] += sign * gi;
                    }
                }
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (val(*a), val(*b));
                let (la, lb) = (ad.len().max(1), bd.len().max(1));
                if let Some(ga) = slot!(*a) {
                    for (i, gi) in g.iter().enumerate() {
                        ga[i % la] += gi * bd[i % lb];
                    }
                }
                if let Some(gb) = slot!(*b) {
                    for (i, gi) in g.iter().enumerate() {
                        gb[i % lb] += gi * ad[i % la];
                    }
                }
            }
            Op::Scale(a, k) => {
                if let Some(ga) = slot!(*a) {
                    for (o, gi) in ga.iter_mut().zip(g) {
                        *o += k * gi;
                    }
                }
            }
            Op::Tanh(a) => {
                if let Some(ga) = slot!(*a) {
                    for ((o, gi), yi) in ga.iter_mut().zip(g).zip(y) {
                        *o += gi * (1.0 - yi * yi);
                    }
                }
            }
            Op::Sigmoid(a) => {
                if let Some(ga) = slot!(*a) {
                    for ((o, gi), yi) in ga.iter_mut().zip(g).zip(y) {
                        *o += gi * yi * (1.0 - yi);
                    }
                }
            }
            Op::Relu(a) => {
                if let Some(ga) = slot!(*a) {
                    for ((o, gi), yi) in ga.iter_mut().zip(g).zip(y) {
                        if *yi > 0.0 {
                            *o += gi;
                        }
                    }
                }
            }
            Op::Matmul(a, b) => {
                let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
                let k = ta.last_dim();
                let n = tb.shape()[1];
                let m = ta.len() / k.max(1);
                if let Some(ga) = slot!(*a) {
                    tensor::gemm_bt(g, tb.data(), ga, m, n, k);
                }
                if let Some(gb) = slot!(*b) {
                    tensor::gemm_at(ta.data(), g, gb, k, m, n);
                }
            }
            Op::Bmm { a, b, transpose_b } => {
                let sa = nodes[a.0].value.shape();
                let (batch, m, k) = (sa[0], sa[1], sa[2]);
                let n = node.value.shape()[2];
                let (ad, bd) = (val(*a), val(*b));
                if let Some(ga) = slot!(*a) {
                    for i in 0..batch {
                        let gi = &g[i * m * n..(i + 1) * m * n];
                        let bb = &bd[i * k * n..(i + 1) * k * n];
                        let out = &mut ga[i * m * k..(i + 1) * m * k];
                        if *transpose_b {
                            tensor::gemm(gi, bb, out, m, n, k);
                        } else {
                            tensor::gemm_bt(gi, bb, out, m, n, k);
                        }
                    }
                }
                if let Some(gb) = slot!(*b) {
                    for i in 0..batch {
                        let gi = &g[i * m * n..(i + 1) * m * n];
                        let ab = &ad[i * m * k..(i + 1) * m * k];
                        let out = &mut gb[i * k * n..(i + 1) * k * n];
                        if *transpose_b {
                            tensor::gemm_at(gi, ab, out, n, m, k);
                        } else {
                            tensor::gemm_at(ab, gi, out, k, m, n);
                        }
                    }
                }
            }
            Op::Softmax(a) => {
                if let Some(ga) = slot!(*a) {
                    let d = node.value.last_dim().max(1);
                    for ((gs, ys), os) in g.chunks(d).zip(y.chunks(d)).zip(ga.chunks_mut(d)) {
                        let dot: f64 = gs.iter().zip(ys).map(|(a, b)| a * b).sum();
                        for ((o, gi), yi) in os.iter_mut().zip(gs).zip(ys) {
                            *o += yi * (gi - dot);
                        }
                    }
                }
            }
            Op::Sum(a) | Op::Mean(a) => {
                if let Some(ga) = slot!(*a) {
                    let scale = if matches!(node.op, Op::Mean(_)) {
                        1.0 / ga.len() as f64
                    } else {
                        1.0
                    };
                    for o in ga.iter_mut() {
                        *o += g[0] * scale;
                    }
                }
            }
            Op::Reshape(a) => {
                if let Some(ga) = slot!(*a) {
                    for (o, gi) in ga.iter_mut().zip(g) {
                        *o += gi;
                    }
                }
            }
            Op::SliceLast { src, start } => {
                let d = nodes[src.0].value.last_dim();
                let len = node.value.last_dim();
                if let Some(ga) = slot!(*src) {
                    for (r, gs) in g.chunks(len.max(1)).enumerate() {
                        for (j, gi) in gs.iter().enumerate() {
                            ga[r * d + start + j] += gi;
                        }
                    }
                }
            }
            Op::ConcatLast(parts) => {
                let width = node.value.last_dim();
                let mut offset = 0;
                for &p in parts {
                    let d = nodes[p.0].value.last_dim();
                    if let Some(gp) = slot!(p) {
                        for (r, os) in gp.chunks_mut(d.max(1)).enumerate() {
                            for (j, o) in os.iter_mut().enumerate() {
                                *o += g[r * width + offset + j];
                            }
                        }
                    }
                    offset += d;
                }
            }
            Op::Step { src, t } => {
                let s = nodes[src.0].value.shape();
                let (steps, d) = (s[1], s[2]);
                if let Some(ga) = slot!(*src) {
                    for (i, gs) in g.chunks(d.max(1)).enumerate() {
                        let off = (i * steps + t) * d;
                        for (o, gi) in ga[off..off + d].iter_mut().zip(gs) {
                            *o += gi;
                        }
                    }
                }
            }
            Op::Stack(parts) => {
                let s = node.value.shape();
                let (k, d) = (s[1], s[2]);
                for (t, &p) in parts.iter().enumerate() {
                    if let Some(gp) = slot!(p) {
                        for (i, os) in gp.chunks_mut(d.max(1)).enumerate() {
                            let off = (i * k + t) * d;
                            for (o, gi) in os.iter_mut().zip(&g[off..off + d]) {
                                *o += gi;
                            }
                        }
                    }
                }
            }
            Op::LayerNorm { src, inv_std } => {
                if let Some(ga) = slot!(*src) {
                    let d = node.value.last_dim().max(1);
                    let rows = g.chunks(d).zip(y.chunks(d)).zip(ga.chunks_mut(d));
                    for (((gs, xs), os), inv) in rows.zip(inv_std) {
                        let mean_g = gs.iter().sum::<f64>() / d as f64;
                        let mean_gx = gs.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                        for ((o, gi), xi) in os.iter_mut().zip(gs).zip(xs) {
                            *o += inv * (gi - mean_g - xi * mean_gx);
                        }
                    }
                }
            }
            Op::Conv1d { x, w } => {
                let sx = nodes[x.0].value.shape();
                let sw = nodes[w.0].value.shape();
                let (n, steps, c) = (sx[0], sx[1], sx[2]);
                let (f, k) = (sw[0], sw[2]);
                let (xd, wd) = (val(*x), val(*w));
                if let Some(gx) = slot!(*x) {
                    for i in 0..n {
                        for t in 0..steps {
                            let gs = &g[(i * steps + t) * f..(i * steps + t + 1) * f];
                            for j in 0..k.min(steps - t) {
                                let row = (i * steps + t + j) * c;
                                for (fi, gi) in gs.iter().enumerate() {
                                    for ci in 0..c {
                                        gx[row + ci] += gi * wd[(fi * c + ci) * k + j];
                                    }
                                }
                            }
                        }
                    }
                }
                if let Some(gw) = slot!(*w) {
                    for i in 0..n {
                        for t in 0..steps {
                            let gs = &g[(i * steps + t) * f..(i * steps + t + 1) * f];
                            for j in 0..k.min(steps - t) {
                                let xr = &xd[(i * steps + t + j) * c..(i * steps + t + j + 1) * c];
                                for (fi, gi) in gs.iter().enumerate() {
                                    for (ci, xv) in xr.iter().enumerate() {
                                        gw[(fi * c + ci) * k + j] += gi * xv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Op::MaxPool { src, argmax } => {
                if let Some(ga) = slot!(*src) {
                    for (gi, &idx) in g.iter().zip(argmax) {
                        ga[idx] += gi;
                    }
                }
            }
        }
    }
}
