//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every op applied during one forward pass. Values are
//! immutable once pushed; [`Tape::backward`] replays the record in reverse
//! and returns the gradient of a scalar with respect to every node that
//! requires one.

use super::kernels;
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul {
        a: Var,
        b: Var,
        batch: usize,
        m: usize,
        k: usize,
        n: usize,
        trans_b: bool,
    },
    Add(Var, Var),
    AddBroadcast(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Sum(Var),
    Softmax {
        x: Var,
        outer: usize,
        axis_len: usize,
        inner: usize,
    },
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<T>,
        rstd: Vec<T>,
    },
    Gelu(Var),
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<Option<usize>>,
        probs: Vec<T>,
        count: usize,
    },
    SplitHeads {
        x: Var,
        batch: usize,
        time: usize,
        heads: usize,
    },
    MergeHeads {
        x: Var,
        batch: usize,
        time: usize,
        heads: usize,
    },
    Reshape(Var),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Recorded computation for one forward pass.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of `var`, or `None` when the loss does not depend on it.
    pub fn get(&self, var: Var) -> Option<&[T]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, var: Var) -> Option<Vec<T>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
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

    /// Learnable input; gradients flow back to it.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Fixed input; no gradient is tracked.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Drops every node recorded after the first `len`. Handles to dropped
    /// nodes become invalid.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// `[.., k] @ [k, n]`, or `[.., k] @ [n, k]^T` with `trans_b`. Leading
    /// dimensions of `a` are flattened into rows.
    pub fn matmul(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        check(sb.len() == 2, || format!("matmul rhs must be 2-D, got {sb:?}"))?;
        let k = *sa.last().unwrap();
        let (kb, n) = if trans_b { (sb[1], sb[0]) } else { (sb[0], sb[1]) };
        check(k == kb, || format!("matmul inner dims differ: {sa:?} x {sb:?}"))?;
        let m = self.value(a).len() / k;
        let mut out = vec![T::zero(); m * n];
        kernels::gemm_acc(
            m,
            n,
            k,
            self.value(a).data(),
            false,
            self.value(b).data(),
            trans_b,
            &mut out,
        );
        let mut shape = sa;
        *shape.last_mut().unwrap() = n;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::MatMul {
                a,
                b,
                batch: 1,
                m,
                k,
                n,
                trans_b,
            },
            rg,
        ))
    }

    /// Batched `[B, m, k] @ [B, k, n]` (or `[B, n, k]^T` with `trans_b`).
    pub fn batch_matmul(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        check(sa.len() == 3 && sb.len() == 3 && sa[0] == sb[0], || {
            format!("batch_matmul needs matching 3-D operands, got {sa:?} and {sb:?}")
        })?;
        let (batch, m, k) = (sa[0], sa[1], sa[2]);
        let (kb, n) = if trans_b { (sb[2], sb[1]) } else { (sb[1], sb[2]) };
        check(k == kb, || format!("batch_matmul inner dims differ: {sa:?} x {sb:?}"))?;
        let mut out = vec![T::zero(); batch * m * n];
        {
            let (av, bv) = (self.value(a).data(), self.value(b).data());
            for i in 0..batch {
                kernels::gemm_acc(
                    m,
                    n,
                    k,
                    &av[i * m * k..(i + 1) * m * k],
                    false,
                    &bv[i * k * n..(i + 1) * k * n],
                    trans_b,
                    &mut out[i * m * n..(i + 1) * m * n],
                );
            }
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(
            Tensor::new(vec![batch, m, n], out)?,
            Op::MatMul {
                a,
                b,
                batch,
                m,
                k,
                n,
                trans_b,
            },
            rg,
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        check(self.shape(a) == self.shape(b), || {
            format!("add shapes differ: {:?} vs {:?}", self.shape(a), self.shape(b))
        })?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(shape, data)?, Op::Add(a, b), rg))
    }

    /// `a + b` with `b` tiled over the leading elements of `a` (bias rows,
    /// positional tables).
    pub fn add_broadcast(&mut self, a: Var, b: Var) -> Result<Var> {
        let (la, lb) = (self.value(a).len(), self.value(b).len());
        check(lb > 0 && la % lb == 0 && self.value(a).last_dim() == self.value(b).last_dim(), || {
            format!(
                "cannot broadcast {:?} over {:?}",
                self.shape(b),
                self.shape(a)
            )
        })?;
        let bv = self.value(b).data();
        let data = self
            .value(a)
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + bv[i % lb])
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(shape, data)?, Op::AddBroadcast(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        check(self.shape(a) == self.shape(b), || {
            format!("mul shapes differ: {:?} vs {:?}", self.shape(a), self.shape(b))
        })?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(shape, data)?, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let value = self.value(a);
        let data = value.data().iter().map(|&x| x * s).collect();
        let t = Tensor::new(value.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(a);
        self.push(t, Op::Scale(a, s), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().copied().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        check(axis < shape.len(), || {
            format!("softmax axis {axis} out of range for rank {}", shape.len())
        })?;
        let outer = shape[..axis].iter().product();
        let axis_len = shape[axis];
        let inner = shape[axis + 1..].iter().product();
        let out = kernels::softmax_axis(self.value(x).data(), outer, axis_len, inner);
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::Softmax {
                x,
                outer,
                axis_len,
                inner,
            },
            rg,
        ))
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: T) -> Result<Var> {
        let d = self.value(x).last_dim();
        check(
            self.value(gain).len() == d && self.value(bias).len() == d,
            || {
                format!(
                    "layer_norm gain/bias must have length {d}, got {} and {}",
                    self.value(gain).len(),
                    self.value(bias).len()
                )
            },
        )?;
        check(eps > T::zero(), || "layer_norm eps must be positive".into())?;
        let (y, xhat, rstd) = kernels::layer_norm_rows(
            self.value(x).data(),
            self.value(gain).data(),
            self.value(bias).data(),
            d,
            eps,
        );
        let shape = self.shape(x).to_vec();
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        Ok(self.push(
            Tensor::new(shape, y)?,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            },
            rg,
        ))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let value = self.value(a);
        let data = value.data().iter().map(|&x| kernels::gelu(x)).collect();
        let t = Tensor::new(value.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(a);
        self.push(t, Op::Gelu(a), rg)
    }

    /// Gathers rows of a `[vocab, d]` table. Output is `[ids.len(), d]`.
    pub fn embedding(&mut self, table: Var, ids: &[u32]) -> Result<Var> {
        let shape = self.shape(table).to_vec();
        check(shape.len() == 2, || format!("embedding table must be 2-D, got {shape:?}"))?;
        check(!ids.is_empty(), || "embedding lookup with no ids".into())?;
        let (rows, d) = (shape[0], shape[1]);
        let ids: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
        if let Some(&bad) = ids.iter().find(|&&i| i >= rows) {
            return Err(Error::invalid(format!("id {bad} out of range for {rows} rows")));
        }
        let tv = self.value(table).data();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &i in &ids {
            out.extend_from_slice(&tv[i * d..(i + 1) * d]);
        }
        let rg = self.rg(table);
        Ok(self.push(
            Tensor::new(vec![ids.len(), d], out)?,
            Op::Embedding { table, ids },
            rg,
        ))
    }

    /// Mean token cross-entropy over rows of `logits` (last axis = vocab)
    /// whose target is not `pad_id`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[u32], pad_id: u32) -> Result<Var> {
        let vocab = self.value(logits).last_dim();
        let rows = self.value(logits).len() / vocab;
        check(rows == targets.len(), || {
            format!("{} targets for {rows} logit rows", targets.len())
        })?;
        if let Some(&bad) = targets.iter().find(|&&t| t as usize >= vocab) {
            return Err(Error::invalid(format!("target id {bad} >= vocab size {vocab}")));
        }
        let targets: Vec<Option<usize>> = targets
            .iter()
            .map(|&t| (t != pad_id).then_some(t as usize))
            .collect();
        let count = targets.iter().flatten().count();
        if count == 0 {
            return Err(Error::UndefinedMean);
        }
        let lv = self.value(logits).data();
        let probs = kernels::softmax_axis(lv, rows, vocab, 1);
        let mut total = T::zero();
        for (r, t) in targets.iter().enumerate() {
            if let Some(t) = *t {
                total -= kernels::log_softmax_at(&lv[r * vocab..(r + 1) * vocab], t);
            }
        }
        let loss = total / T::lit(count as f64);
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                targets,
                probs,
                count,
            },
            rg,
        ))
    }

    /// `[batch * time, heads * d]` to `[batch * heads, time, d]`.
    pub fn split_heads(&mut self, x: Var, batch: usize, time: usize, heads: usize) -> Result<Var> {
        let width = self.value(x).last_dim();
        check(
            self.value(x).len() == batch * time * width && width % heads == 0,
            || format!("cannot split {:?} into {batch}x{time} with {heads} heads", self.shape(x)),
        )?;
        let d = width / heads;
        let src = self.value(x).data();
        let mut out = vec![T::zero(); src.len()];
        for b in 0..batch {
            for t in 0..time {
                for h in 0..heads {
                    let from = (b * time + t) * width + h * d;
                    let to = ((b * heads + h) * time + t) * d;
                    out[to..to + d].copy_from_slice(&src[from..from + d]);
                }
            }
        }
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::new(vec![batch * heads, time, d], out)?,
            Op::SplitHeads {
                x,
                batch,
                time,
                heads,
            },
            rg,
        ))
    }

    /// Inverse of [`Tape::split_heads`].
    pub fn merge_heads(&mut self, x: Var, batch: usize, time: usize, heads: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        check(
            shape.len() == 3 && shape[0] == batch * heads && shape[1] == time,
            || format!("cannot merge {shape:?} into {batch}x{time} with {heads} heads"),
        )?;
        let d = shape[2];
        let width = heads * d;
        let src = self.value(x).data();
        let mut out = vec![T::zero(); src.len()];
        for b in 0..batch {
            for t in 0..time {
                for h in 0..heads {
                    let to = (b * time + t) * width + h * d;
                    let from = ((b * heads + h) * time + t) * d;
                    out[to..to + d].copy_from_slice(&src[from..from + d]);
                }
            }
        }
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::new(vec![batch * time, width], out)?,
            Op::MergeHeads {
                x,
                batch,
                time,
                heads,
            },
            rg,
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let t = self.value(x).clone().reshape(shape)?;
        let rg = self.rg(x);
        Ok(self.push(t, Op::Reshape(x), rg))
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        check(self.value(loss).len() == 1, || {
            format!("backward needs a scalar, got shape {:?}", self.shape(loss))
        })?;
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        // Intermediate gradients are only needed during the sweep.
        for (node, g) in self.nodes.iter().zip(grads.iter_mut()) {
            if !matches!(node.op, Op::Leaf) {
                *g = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn acc<'g>(&self, grads: &'g mut [Option<Vec<T>>], v: Var) -> Option<&'g mut [T]> {
        if !self.rg(v) {
            return None;
        }
        let len = self.value(v).len();
        Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); len]))
    }

    fn propagate(&self, node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
        match node.op {
            Op::Leaf => {}
            Op::MatMul {
                a,
                b,
                batch,
                m,
                k,
                n,
                trans_b,
            } => {
                let av = self.value(a).data();
                let bv = self.value(b).data();
                if let Some(da) = self.acc(grads, a) {
                    for i in 0..batch {
                        let gi = &g[i * m * n..(i + 1) * m * n];
                        let bi = &bv[i * k * n..(i + 1) * k * n];
                        let dai = &mut da[i * m * k..(i + 1) * m * k];
                        // dA = dC @ op(B)^T
                        kernels::gemm_acc(m, k, n, gi, false, bi, !trans_b, dai);
                    }
                }
                if let Some(db) = self.acc(grads, b) {
                    for i in 0..batch {
                        let gi = &g[i * m * n..(i + 1) * m * n];
                        let ai = &av[i * m * k..(i + 1) * m * k];
                        let dbi = &mut db[i * k * n..(i + 1) * k * n];
                        if trans_b {
                            // B stored [n,k]: dB = dC^T @ A
                            kernels::gemm_acc(n, k, m, gi, true, ai, false, dbi);
                        } else {
                            // dB = A^T @ dC
                            kernels::gemm_acc(k, n, m, ai, true, gi, false, dbi);
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if let Some(d) = self.acc(grads, v) {
                        d.iter_mut().zip(g).for_each(|(d, &g)| *d += g);
                    }
                }
            }
            Op::AddBroadcast(a, b) => {
                if let Some(da) = self.acc(grads, a) {
                    da.iter_mut().zip(g).for_each(|(d, &g)| *d += g);
                }
                if let Some(db) = self.acc(grads, b) {
                    let lb = db.len();
                    for chunk in g.chunks(lb) {
                        db.iter_mut().zip(chunk).for_each(|(d, &g)| *d += g);
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(a).data(), self.value(b).data());
                if let Some(da) = self.acc(grads, a) {
                    for i in 0..da.len() {
                        da[i] += g[i] * bv[i];
                    }
                }
                if let Some(db) = self.acc(grads, b) {
                    for i in 0..db.len() {
                        db[i] += g[i] * av[i];
                    }
                }
            }
            Op::Scale(a, s) => {
                if let Some(da) = self.acc(grads, a) {
                    da.iter_mut().zip(g).for_each(|(d, &g)| *d += g * s);
                }
            }
            Op::Sum(a) => {
                if let Some(da) = self.acc(grads, a) {
                    da.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::Softmax {
                x,
                outer,
                axis_len,
                inner,
            } => {
                if let Some(dx) = self.acc(grads, x) {
                    let y = node.value.data();
                    kernels::softmax_axis_backward(y, g, dx, outer, axis_len, inner);
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                ref xhat,
                ref rstd,
            } => {
                let gv = self.value(gain).data();
                let d = gv.len();
                let rows = xhat.len() / d;
                let inv_d = T::one() / T::lit(d as f64);
                if let Some(dx) = self.acc(grads, x) {
                    for r in 0..rows {
                        let gr = &g[r * d..(r + 1) * d];
                        let hr = &xhat[r * d..(r + 1) * d];
                        let mut mean_dh = T::zero();
                        let mut mean_dh_h = T::zero();
                        for j in 0..d {
                            let dh = gr[j] * gv[j];
                            mean_dh += dh;
                            mean_dh_h += dh * hr[j];
                        }
                        mean_dh *= inv_d;
                        mean_dh_h *= inv_d;
                        for j in 0..d {
                            let dh = gr[j] * gv[j];
                            dx[r * d + j] += rstd[r] * (dh - mean_dh - hr[j] * mean_dh_h);
                        }
                    }
                }
                if let Some(dg) = self.acc(grads, gain) {
                    for r in 0..rows {
                        for j in 0..d {
                            dg[j] += g[r * d + j] * xhat[r * d + j];
                        }
                    }
                }
                if let Some(db) = self.acc(grads, bias) {
                    for r in 0..rows {
                        for j in 0..d {
                            db[j] += g[r * d + j];
                        }
                    }
                }
            }
            Op::Gelu(a) => {
                let av = self.value(a).data();
                if let Some(da) = self.acc(grads, a) {
                    for i in 0..da.len() {
                        da[i] += g[i] * kernels::gelu_grad(av[i]);
                    }
                }
            }
            Op::Embedding { table, ref ids } => {
                let d = self.value(table).last_dim();
                if let Some(dt) = self.acc(grads, table) {
                    for (r, &id) in ids.iter().enumerate() {
                        for j in 0..d {
                            dt[id * d + j] += g[r * d + j];
                        }
                    }
                }
            }
            Op::CrossEntropy {
                logits,
                ref targets,
                ref probs,
                count,
            } => {
                let vocab = self.value(logits).last_dim();
                let scale = g[0] / T::lit(count as f64);
                if let Some(dl) = self.acc(grads, logits) {
                    for (r, t) in targets.iter().enumerate() {
                        let Some(t) = *t else { continue };
                        let row = &mut dl[r * vocab..(r + 1) * vocab];
                        let pr = &probs[r * vocab..(r + 1) * vocab];
                        for j in 0..vocab {
                            row[j] += pr[j] * scale;
                        }
                        row[t] -= scale;
                    }
                }
            }
            Op::SplitHeads {
                x,
                batch,
                time,
                heads,
            } => {
                if let Some(dx) = self.acc(grads, x) {
                    let width = dx.len() / (batch * time);
                    let d = width / heads;
                    for b in 0..batch {
                        for t in 0..time {
                            for h in 0..heads {
                                let to = (b * time + t) * width + h * d;
                                let from = ((b * heads + h) * time + t) * d;
                                for j in 0..d {
                                    dx[to + j] += g[from + j];
                                }
                            }
                        }
                    }
                }
            }
            Op::MergeHeads {
                x,
                batch,
                time,
                heads,
            } => {
                if let Some(dx) = self.acc(grads, x) {
                    let width = dx.len() / (batch * time);
                    let d = width / heads;
                    for b in 0..batch {
                        for t in 0..time {
                            for h in 0..heads {
                                let from = (b * time + t) * width + h * d;
                                let to = ((b * heads + h) * time + t) * d;
                                for j in 0..d {
                                    dx[to + j] += g[from + j];
                                }
                            }
                        }
                    }
                }
            }
            Op::Reshape(x) => {
                if let Some(dx) = self.acc(grads, x) {
                    dx.iter_mut().zip(g).for_each(|(d, &g)| *d += g);
                }
            }
        }
    }
}
