//! Multi-head X-masked attention over EPI token sequences.
//!
//! For a token matrix `T: [N, S·L, C]` the block computes `Q = K = LN(T)`,
//! `V = T`, and per head `h`
//!
//! ```text
//! X_h = softmax(Q W_q,h (K W_k,h)ᵀ / sqrt(C/N_H) + M),   O_h = X_h V W_v,h
//! ```
//!
//! The heads are concatenated, projected by `W_O` and added to `T`. Weights
//! of all heads are stored side by side as `C × C` matrices.

use crate::autodiff::{Graph, ParamId, Real, Tensor, Var};
use crate::error::{check_divisible, Result};

use super::layers::{Bound, Init};
use super::xmask::build_xmask;

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct MhxaParams {
    pub ln_gamma: ParamId,
    pub ln_beta: ParamId,
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub wo: ParamId,
}

impl MhxaParams {
    /// `W_O` starts at zero when `zero_out` is set, making the block an
    /// identity map.
    pub fn init<T: Real>(init: &mut Init<'_, T>, prefix: &str, c: usize, zero_out: bool) -> Result<Self> {
        Ok(Self {
            ln_gamma: init.filled(&format!("{prefix}.ln.gamma"), c, 1.0)?,
            ln_beta: init.filled(&format!("{prefix}.ln.beta"), c, 0.0)?,
            wq: init.matrix(&format!("{prefix}.wq"), c, c, false)?,
            wk: init.matrix(&format!("{prefix}.wk"), c, c, false)?,
            wv: init.matrix(&format!("{prefix}.wv"), c, c, false)?,
            wo: init.matrix(&format!("{prefix}.wo"), c, c, zero_out)?,
        })
    }
}

/// Splits `[N, S, C]` into `[N·H, S, C/H]`.
fn split_heads<T: Real>(g: &mut Graph<T>, x: Var, heads: usize) -> Result<Var> {
    let s = g.shape(x).to_vec();
    let t = g.reshape(x, &[s[0], s[1], heads, s[2] / heads])?;
    let t = g.permute(t, &[0, 2, 1, 3])?;
    g.reshape(t, &[s[0] * heads, s[1], s[2] / heads])
}

fn merge_heads<T: Real>(g: &mut Graph<T>, x: Var, heads: usize) -> Result<Var> {
    let s = g.shape(x).to_vec();
    let n = s[0] / heads;
    let t = g.reshape(x, &[n, heads, s[1], s[2]])?;
    let t = g.permute(t, &[0, 2, 1, 3])?;
    g.reshape(t, &[n, s[1], heads * s[2]])
}

/// Masked multi-head attention on `tokens: [N, S·L, C]` with an additive
/// `[S·L, S·L]` mask (`None` = unmasked).
pub fn mhxa<T: Real>(
    g: &mut Graph<T>,
    p: &Bound,
    tokens: Var,
    mask: Option<&Tensor<T>>,
    params: &MhxaParams,
    heads: usize,
) -> Result<Var> {
    let c = *g.shape(tokens).last().unwrap_or(&0);
    check_divisible("token channels", c, heads)?;
    let ln = g.layer_norm(tokens, p[params.ln_gamma.index()], p[params.ln_beta.index()], LN_EPS)?;
    let q = g.linear(ln, p[params.wq.index()], None)?;
    let k = g.linear(ln, p[params.wk.index()], None)?;
    let v = g.linear(tokens, p[params.wv.index()], None)?;
    // scaling q rather than the scores touches S·C instead of S² values
    let q = g.scale(q, 1.0 / ((c / heads) as f64).sqrt())?;
    let (q, k, v) = (split_heads(g, q, heads)?, split_heads(g, k, heads)?, split_heads(g, v, heads)?);
    let scores = g.batch_matmul(q, k, true)?;
    let att = g.softmax_masked(scores, mask)?;
    let o = g.batch_matmul(att, v, false)?;
    let o = merge_heads(g, o, heads)?;
    let o = g.linear(o, p[params.wo.index()], None)?;
    g.add(o, tokens)
}

/// Which EPI subspace a pass attends over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpiPass {
    /// Sequences over `(u, x)`, one per `(v, y)`.
    Ux,
    /// Sequences over `(v, y)`, one per `(u, x)`.
    Vy,
}

impl EpiPass {
    /// Permutation of `[B, C, U, V, Y, X]` into `[B, b0, b1, angle, spatial, C]`.
    fn perm(self) -> [usize; 6] {
        match self {
            EpiPass::Ux => [0, 3, 4, 2, 5, 1],
            EpiPass::Vy => [0, 2, 5, 3, 4, 1],
        }
    }
}

/// One attention pass over an EPI subspace; shape preserving.
pub fn epi_pass<T: Real>(
    g: &mut Graph<T>,
    p: &Bound,
    f: Var,
    pass: EpiPass,
    params: &MhxaParams,
    heads: usize,
    d_max: f64,
) -> Result<Var> {
    let perm = pass.perm();
    let t = g.permute(f, &perm)?;
    let s = g.shape(t).to_vec();
    let (angles, len) = (s[3], s[4]);
    let t = g.reshape(t, &[s[0] * s[1] * s[2], angles * len, s[5]])?;
    let mask = if d_max.is_infinite() {
        None
    } else {
        Some(build_xmask::<T>(angles, len, d_max)?)
    };
    let t = mhxa(g, p, t, mask.as_ref(), params, heads)?;
    let t = g.reshape(t, &s)?;
    g.permute(t, &super::layers::inv(&perm))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpixParams {
    pub ux: MhxaParams,
    pub vy: MhxaParams,
}

impl EpixParams {
    pub fn init<T: Real>(init: &mut Init<'_, T>, prefix: &str, c: usize, zero_out: bool) -> Result<Self> {
        Ok(Self {
            ux: MhxaParams::init(init, &format!("{prefix}.ux"), c, zero_out)?,
            vy: MhxaParams::init(init, &format!("{prefix}.vy"), c, zero_out)?,
        })
    }
}

/// Horizontal then vertical EPI attention.
pub fn epixformer<T: Real>(
    g: &mut Graph<T>,
    p: &Bound,
    f: Var,
    params: &EpixParams,
    heads: usize,
    d_max: f64,
) -> Result<Var> {
    let f = epi_pass(g, p, f, EpiPass::Ux, &params.ux, heads, d_max)?;
    epi_pass(g, p, f, EpiPass::Vy, &params.vy, heads, d_max)
}
