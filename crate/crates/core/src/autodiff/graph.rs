use crate::error::{LfError, Result};
use crate::layout::{check_perm, inverse_perm, numel, permute_copy, permuted_shape};
use crate::par;

use super::conv::{self, Conv2dSpec, ConvDims};
use super::params::{ParamId, ParamStore};
use super::real::{gemm, Mat};
use super::{Real, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Leaf,
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    LeakyRelu(Var, T),
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        dims: ConvDims,
    },
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    BatchMatmul {
        a: Var,
        b: Var,
        trans_b: bool,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<T>,
        rstd: Vec<T>,
    },
    Softmax(Var),
    Permute(Var, Vec<usize>),
    Reshape(Var),
    Concat(Vec<Var>, usize),
    L1(Var, Var),
    Sum(Var),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Tape of tensor operations recorded for one forward pass.
///
/// Every operation validates shapes up front and rejects non-finite outputs.
/// Nodes are appended in evaluation order, so [`Graph::backward`] is a single
/// reverse sweep. Gradients are kept only for leaves.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    params: Vec<(ParamId, Var)>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Leaf gradients produced by [`Graph::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of a leaf, if the loss depends on it.
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

fn shape_err(op: &str, detail: String) -> LfError {
    LfError::shape(format!("{op}: {detail}"))
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn leaf(&mut self, value: Tensor<T>, needs_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(LfError::NonFinite("graph input"));
        }
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Input that is not differentiated.
    pub fn constant(&mut self, value: Tensor<T>) -> Result<Var> {
        self.leaf(value, false)
    }

    /// Input whose gradient is wanted.
    pub fn variable(&mut self, value: Tensor<T>) -> Result<Var> {
        self.leaf(value, true)
    }

    /// Binds a stored parameter as a differentiable leaf.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Result<Var> {
        let v = self.leaf(store.get(id).clone(), true)?;
        self.params.push((id, v));
        Ok(v)
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(LfError::NonFinite(name));
        }
        let needs_grad = self.inputs(&op).iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn inputs(&self, op: &Op<T>) -> Vec<Var> {
        match op {
            Op::Leaf => vec![],
            Op::Add(a, b) | Op::Mul(a, b) | Op::L1(a, b) => vec![*a, *b],
            Op::Scale(a, _) | Op::LeakyRelu(a, _) | Op::Softmax(a) | Op::Sum(a) => vec![*a],
            Op::Permute(a, _) | Op::Reshape(a) => vec![*a],
            Op::Conv2d { x, w, b, .. } | Op::Linear { x, w, b } => {
                let mut v = vec![*x, *w];
                v.extend(b);
                v
            }
            Op::BatchMatmul { a, b, .. } => vec![*a, *b],
            Op::LayerNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
            Op::Concat(xs, _) => xs.clone(),
        }
    }

    fn same_shape(&self, op: &str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    fn zip_map(&self, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Tensor<T> {
        let (x, y) = (self.value(a), self.value(b));
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        Tensor::new(x.shape().to_vec(), data).expect("same shape")
    }

    fn map(&self, a: Var, f: impl Fn(T) -> T) -> Tensor<T> {
        let x = self.value(a);
        Tensor::new(x.shape().to_vec(), x.data().iter().map(|&v| f(v)).collect())
            .expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.zip_map(a, b, |p, q| p + q);
        self.push(out, Op::Add(a, b), "add")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.zip_map(a, b, |p, q| p * q);
        self.push(out, Op::Mul(a, b), "mul")
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let s = T::of(s);
        let out = self.map(a, |v| v * s);
        self.push(out, Op::Scale(a, s), "scale")
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        let s = T::of(slope);
        let out = self.map(a, |v| if v > T::zero() { v } else { v * s });
        self.push(out, Op::LeakyRelu(a, s), "leaky_relu")
    }

    /// Cross-correlation of `x: [N, Ci, H, W]` with `w: [Co, Ci, kh, kw]`
    /// plus optional bias `[Co]` (no kernel flip).
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, spec: Conv2dSpec) -> Result<Var> {
        let dims = ConvDims::new(self.shape(x), self.shape(w), spec)?;
        if let Some(b) = b {
            if self.shape(b) != [dims.co] {
                return Err(shape_err("conv2d", format!("bias shape {:?}", self.shape(b))));
            }
        }
        let out = conv::forward(
            self.value(x).data(),
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
            &dims,
        );
        let out = Tensor::new(dims.out_shape(), out)?;
        self.push(out, Op::Conv2d { x, w, b, dims }, "conv2d")
    }

    /// `x[..., In] · w[In, Out] + b[Out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if ws.len() != 2 || xs.last() != Some(&ws[0]) {
            return Err(shape_err("linear", format!("{xs:?} · {ws:?}")));
        }
        let (din, dout) = (ws[0], ws[1]);
        if let Some(b) = b {
            if self.shape(b) != [dout] {
                return Err(shape_err("linear", format!("bias shape {:?}", self.shape(b))));
            }
        }
        let m = numel(&xs) / din.max(1);
        let mut out = vec![T::zero(); m * dout];
        if let Some(b) = b {
            let bv = self.value(b).data();
            out.chunks_mut(dout).for_each(|row| row.copy_from_slice(bv));
        }
        let beta = if b.is_some() { T::one() } else { T::zero() };
        gemm(
            m,
            din,
            dout,
            Mat::rm(self.value(x).data(), din),
            Mat::rm(self.value(w).data(), dout),
            beta,
            &mut out,
            dout,
        );
        let mut shape = xs;
        *shape.last_mut().unwrap() = dout;
        self.push(Tensor::new(shape, out)?, Op::Linear { x, w, b }, "linear")
    }

    /// `a[B, M, K] · b[B, K, N]`, or `a · bᵀ` with `b: [B, N, K]`.
    pub fn batch_matmul(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let bad = || shape_err("batch_matmul", format!("{sa:?} · {sb:?} (trans_b={trans_b})"));
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] {
            return Err(bad());
        }
        let (bt, m, k) = (sa[0], sa[1], sa[2]);
        let (kb, n) = if trans_b { (sb[2], sb[1]) } else { (sb[1], sb[2]) };
        if kb != k {
            return Err(bad());
        }
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![T::zero(); bt * m * n];
        par::for_each_chunk_mut(&mut out, m * n, |i, c| {
            let ai = &av[i * m * k..(i + 1) * m * k];
            let bi = &bv[i * k * n..(i + 1) * k * n];
            let bm = if trans_b { Mat::rm_t(bi, k) } else { Mat::rm(bi, n) };
            gemm(m, k, n, Mat::rm(ai, k), bm, T::zero(), c, n);
        });
        let out = Tensor::new(vec![bt, m, n], out)?;
        self.push(out, Op::BatchMatmul { a, b, trans_b }, "batch_matmul")
    }

    /// Normalises over the last axis, then applies `gamma`, `beta` (both
    /// shaped like that axis).
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let d = *xs
            .last()
            .ok_or_else(|| shape_err("layer_norm", "scalar input".into()))?;
        if self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return Err(shape_err(
                "layer_norm",
                format!("affine {:?}/{:?} for width {d}", self.shape(gamma), self.shape(beta)),
            ));
        }
        let eps = T::of(eps);
        let inv_d = T::of(1.0 / d as f64);
        let (g, bt) = (self.value(gamma).data(), self.value(beta).data());
        let xv = self.value(x).data();
        let rows = xv.len() / d.max(1);
        let mut xhat = vec![T::zero(); xv.len()];
        let mut rstd = vec![T::zero(); rows];
        let mut out = vec![T::zero(); xv.len()];
        for r in 0..rows {
            let row = &xv[r * d..(r + 1) * d];
            let mean = row.iter().copied().sum::<T>() * inv_d;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
            let rs = T::one() / (var + eps).sqrt();
            rstd[r] = rs;
            for j in 0..d {
                let h = (row[j] - mean) * rs;
                xhat[r * d + j] = h;
                out[r * d + j] = h * g[j] + bt[j];
            }
        }
        let out = Tensor::new(xs, out)?;
        let op = Op::LayerNorm {
            x,
            gamma,
            beta,
            xhat,
            rstd,
        };
        self.push(out, op, "layer_norm")
    }

    /// Softmax over the last axis of `x + mask`, where `mask` has the shape
    /// of the trailing two axes and holds `0` or `−∞`. Rows with no finite
    /// entry are an error.
    pub fn softmax_masked(&mut self, x: Var, mask: Option<&Tensor<T>>) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if xs.is_empty() {
            return Err(shape_err("softmax", "scalar input".into()));
        }
        let cols = xs[xs.len() - 1];
        let block = match mask {
            Some(m) => {
                let ok = xs.len() >= 2 && m.shape() == &xs[xs.len() - 2..];
                if !ok {
                    return Err(shape_err(
                        "softmax",
                        format!("mask {:?} for input {xs:?}", m.shape()),
                    ));
                }
                m.numel()
            }
            None => cols,
        };
        let xv = self.value(x).data();
        let mut out = vec![T::zero(); xv.len()];
        let mut failed = std::sync::atomic::AtomicBool::new(false);
        par::for_each_chunk_mut(&mut out, block.max(1), |bi, chunk| {
            let base = bi * block;
            for (r, row) in chunk.chunks_mut(cols).enumerate() {
                let off = r * cols;
                let xr = &xv[base + off..base + off + cols];
                let mr = mask.map(|m| &m.data()[off..off + cols]);
                let shifted = |j: usize| match mr {
                    Some(m) => xr[j] + m[j],
                    None => xr[j],
                };
                let mx = (0..cols).map(shifted).fold(T::neg_infinity(), T::max);
                if mx == T::neg_infinity() {
                    failed.store(true, std::sync::atomic::Ordering::Relaxed);
                    return;
                }
                let mut sum = T::zero();
                for (j, o) in row.iter_mut().enumerate() {
                    let z = shifted(j);
                    // masked entries stay exactly zero without an exp call
                    if z != T::neg_infinity() {
                        *o = (z - mx).exp();
                        sum += *o;
                    }
                }
                let inv = T::one() / sum;
                row.iter_mut().for_each(|o| *o *= inv);
            }
        });
        if *failed.get_mut() {
            return Err(LfError::invalid("softmax row is entirely masked"));
        }
        self.push(Tensor::new(xs, out)?, Op::Softmax(x), "softmax")
    }

    /// Output axis `i` is input axis `perm[i]`.
    pub fn permute(&mut self, x: Var, perm: &[usize]) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        check_perm(perm, xs.len())?;
        let out = permute_copy(self.value(x).data(), &xs, perm);
        let out = Tensor::new(permuted_shape(&xs, perm), out)?;
        self.push(out, Op::Permute(x, perm.to_vec()), "permute")
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        if numel(shape) != self.value(x).numel() {
            return Err(shape_err(
                "reshape",
                format!("{:?} -> {shape:?}", self.shape(x)),
            ));
        }
        let out = Tensor::new(shape.to_vec(), self.value(x).data().to_vec())?;
        self.push(out, Op::Reshape(x), "reshape")
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let first = self
            .shape(*xs.first().ok_or_else(|| LfError::invalid("concat of nothing"))?)
            .to_vec();
        if axis >= first.len() {
            return Err(shape_err("concat", format!("axis {axis} for {first:?}")));
        }
        let mut total = 0;
        for &v in xs {
            let s = self.shape(v);
            let ok = s.len() == first.len()
                && s.iter().zip(&first).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !ok {
                return Err(shape_err("concat", format!("{s:?} vs {first:?} on axis {axis}")));
            }
            total += s[axis];
        }
        let outer = numel(&first[..axis]);
        let inner = numel(&first[axis + 1..]);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in xs {
                let w = self.shape(v)[axis] * inner;
                out.extend_from_slice(&self.value(v).data()[o * w..(o + 1) * w]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        self.push(Tensor::new(shape, out)?, Op::Concat(xs.to_vec(), axis), "concat")
    }

    /// Mean absolute difference.
    pub fn l1_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape("l1_loss", pred, target)?;
        let n = self.value(pred).numel().max(1);
        let s: f64 = self
            .value(pred)
            .data()
            .iter()
            .zip(self.value(target).data())
            .map(|(&p, &t)| (p - t).abs().f64())
            .sum();
        self.push(Tensor::scalar(T::of(s / n as f64)), Op::L1(pred, target), "l1_loss")
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s: T = self.value(x).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(x), "sum")
    }

    /// `Σ w ⊙ x` for a constant weight tensor.
    pub fn weighted_sum(&mut self, x: Var, w: Tensor<T>) -> Result<Var> {
        let w = self.constant(w)?;
        let p = self.mul(x, w)?;
        self.sum(p)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).numel() != 1 {
            return Err(LfError::invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) || !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backward_node(node, &g, &mut grads);
        }
        Ok(Gradients { grads })
    }

    fn slot<'a>(&self, grads: &'a mut [Option<Vec<T>>], v: Var) -> Option<&'a mut Vec<T>> {
        if !self.nodes[v.0].needs_grad {
            return None;
        }
        let n = self.nodes[v.0].value.numel();
        Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); n]))
    }

    fn accumulate(&self, grads: &mut [Option<Vec<T>>], v: Var, f: impl Fn(usize) -> T) {
        if let Some(s) = self.slot(grads, v) {
            for (i, a) in s.iter_mut().enumerate() {
                *a += f(i);
            }
        }
    }

    fn backward_node(&self, node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |i| g[i]);
                self.accumulate(grads, *b, |i| g[i]);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, |i| g[i] * bv[i]);
                self.accumulate(grads, *b, |i| g[i] * av[i]);
            }
            Op::Scale(a, s) => self.accumulate(grads, *a, |i| g[i] * *s),
            Op::LeakyRelu(a, s) => {
                let x = self.value(*a).data();
                self.accumulate(grads, *a, |i| if x[i] > T::zero() { g[i] } else { g[i] * *s });
            }
            Op::Conv2d { x, w, b, dims } => {
                let nx = self.nodes[x.0].needs_grad;
                let nw = self.nodes[w.0].needs_grad;
                let cg = conv::backward(self.value(*x).data(), self.value(*w).data(), g, dims, nx, nw);
                if let Some(dx) = cg.dx {
                    self.accumulate(grads, *x, |i| dx[i]);
                }
                if nw {
                    self.accumulate(grads, *w, |i| cg.dw[i]);
                }
                if let Some(b) = b {
                    self.accumulate(grads, *b, |i| cg.db[i]);
                }
            }
            Op::Linear { x, w, b } => {
                let ws = self.shape(*w);
                let (din, dout) = (ws[0], ws[1]);
                let m = g.len() / dout.max(1);
                let (xv, wv) = (self.value(*x).data(), self.value(*w).data());
                if let Some(s) = self.slot(grads, *x) {
                    gemm(m, dout, din, Mat::rm(g, dout), Mat::rm_t(wv, dout), T::one(), s, din);
                }
                if let Some(s) = self.slot(grads, *w) {
                    gemm(din, m, dout, Mat::rm_t(xv, din), Mat::rm(g, dout), T::one(), s, dout);
                }
                if let Some(b) = b {
                    if let Some(s) = self.slot(grads, *b) {
                        for row in g.chunks(dout) {
                            for (a, &v) in s.iter_mut().zip(row) {
                                *a += v;
                            }
                        }
                    }
                }
            }
            Op::BatchMatmul { a, b, trans_b } => {
                let sa = self.shape(*a);
                let (m, k) = (sa[1], sa[2]);
                let n = g.len() / (sa[0] * m).max(1);
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                if let Some(s) = self.slot(grads, *a) {
                    par::for_each_chunk_mut(s, m * k, |i, da| {
                        let gi = &g[i * m * n..(i + 1) * m * n];
                        let bi = &bv[i * k * n..(i + 1) * k * n];
                        // dA = dC · Bᵀ, with B stored [K, N] or [N, K]
                        let bm = if *trans_b { Mat::rm(bi, k) } else { Mat::rm_t(bi, n) };
                        gemm(m, n, k, Mat::rm(gi, n), bm, T::one(), da, k);
                    });
                }
                if let Some(s) = self.slot(grads, *b) {
                    par::for_each_chunk_mut(s, k * n, |i, db| {
                        let gi = &g[i * m * n..(i + 1) * m * n];
                        let ai = &av[i * m * k..(i + 1) * m * k];
                        if *trans_b {
                            gemm(n, m, k, Mat::rm_t(gi, n), Mat::rm(ai, k), T::one(), db, k);
                        } else {
                            gemm(k, m, n, Mat::rm_t(ai, k), Mat::rm(gi, n), T::one(), db, n);
                        }
                    });
                }
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            } => {
                let gv = self.value(*gamma).data();
                let d = gv.len();
                let inv_d = T::of(1.0 / d as f64);
                if let Some(s) = self.slot(grads, *x) {
                    for (r, &rs) in rstd.iter().enumerate() {
                        let (gr, hr) = (&g[r * d..(r + 1) * d], &xhat[r * d..(r + 1) * d]);
                        let mut m1 = T::zero();
                        let mut m2 = T::zero();
                        for j in 0..d {
                            let dh = gr[j] * gv[j];
                            m1 += dh;
                            m2 += dh * hr[j];
                        }
                        m1 *= inv_d;
                        m2 *= inv_d;
                        for j in 0..d {
                            s[r * d + j] += rs * (gr[j] * gv[j] - m1 - hr[j] * m2);
                        }
                    }
                }
                if let Some(s) = self.slot(grads, *gamma) {
                    for (gr, hr) in g.chunks(d).zip(xhat.chunks(d)) {
                        for j in 0..d {
                            s[j] += gr[j] * hr[j];
                        }
                    }
                }
                if let Some(s) = self.slot(grads, *beta) {
                    for gr in g.chunks(d) {
                        for j in 0..d {
                            s[j] += gr[j];
                        }
                    }
                }
            }
            Op::Softmax(x) => {
                let y = node.value.data();
                let cols = *node.value.shape().last().unwrap();
                if let Some(s) = self.slot(grads, *x) {
                    par::for_each_chunk_mut(s, cols.max(1), |r, dx| {
                        let (gr, yr) = (&g[r * cols..(r + 1) * cols], &y[r * cols..(r + 1) * cols]);
                        let dot: T = gr.iter().zip(yr).map(|(&a, &b)| a * b).sum();
                        for j in 0..cols {
                            dx[j] += yr[j] * (gr[j] - dot);
                        }
                    });
                }
            }
            Op::Permute(x, perm) => {
                let back = permute_copy(g, node.value.shape(), &inverse_perm(perm));
                self.accumulate(grads, *x, |i| back[i]);
            }
            Op::Reshape(x) => self.accumulate(grads, *x, |i| g[i]),
            Op::Concat(xs, axis) => {
                let shape = node.value.shape();
                let outer = numel(&shape[..*axis]);
                let inner = numel(&shape[axis + 1..]);
                let total = shape[*axis] * inner;
                let mut off = 0;
                for &v in xs {
                    let w = self.shape(v)[*axis] * inner;
                    self.accumulate(grads, v, |i| {
                        let (o, r) = (i / w, i % w);
                        g[o * total + off + r]
                    });
                    off += w;
                }
                debug_assert_eq!(outer * total, g.len());
            }
            Op::L1(p, t) => {
                let (pv, tv) = (self.value(*p).data(), self.value(*t).data());
                let scale = g[0] / T::of(pv.len().max(1) as f64);
                let sign = |i: usize| {
                    let d = pv[i] - tv[i];
                    if d > T::zero() {
                        scale
                    } else if d < T::zero() {
                        -scale
                    } else {
                        T::zero()
                    }
                };
                self.accumulate(grads, *p, sign);
                self.accumulate(grads, *t, |i| -sign(i));
            }
            Op::Sum(x) => self.accumulate(grads, *x, |_| g[0]),
        }
    }

    /// Gradients for every parameter of `store` bound in this graph
    /// (`None` for parameters the loss does not reach).
    pub fn param_grads(&self, grads: &Gradients<T>, store: &ParamStore<T>) -> Vec<Option<Vec<T>>> {
        let mut out: Vec<Option<Vec<T>>> = (0..store.len()).map(|_| None).collect();
        for &(id, v) in &self.params {
            if let Some(g) = grads.get(v) {
                match &mut out[id.index()] {
                    Some(acc) => acc.iter_mut().zip(g).for_each(|(a, &b)| *a += b),
                    slot => *slot = Some(g.to_vec()),
                }
            }
        }
        out
    }
}
