//! Task heads turning trunk features into an output light field.

use crate::autodiff::{Graph, Real, Var};
use crate::error::{check_divisible, LfError, Result};

use super::layers::{per_view, Bound, ConvParams};

/// `[N, C·r², H, W] → [N, C, H·r, W·r]`; channel `c·r² + i·r + j` lands at
/// `(h·r + i, w·r + j)`.
pub fn pixel_shuffle<T: Real>(g: &mut Graph<T>, x: Var, r: usize) -> Result<Var> {
    let s = g.shape(x).to_vec();
    if s.len() != 4 {
        return Err(LfError::shape(format!("pixel shuffle needs [N, C, H, W], got {s:?}")));
    }
    check_divisible("pixel shuffle channels", s[1], r * r)?;
    let c = s[1] / (r * r);
    let t = g.reshape(x, &[s[0], c, r, r, s[2], s[3]])?;
    let t = g.permute(t, &[0, 1, 4, 2, 5, 3])?;
    g.reshape(t, &[s[0], c, s[2] * r, s[3] * r])
}

/// Per-view 3×3 conv to `C_out·α²` channels and pixel shuffle; `skip`
/// (shaped like the output) is added when given.
pub fn ssr_head<T: Real>(
    g: &mut Graph<T>,
    p: &Bound,
    f: Var,
    conv: &ConvParams,
    scale: usize,
    skip: Option<Var>,
) -> Result<Var> {
    let out = per_view(g, f, |g, t| {
        let t = conv.apply(g, p, t)?;
        pixel_shuffle(g, t, scale)
    })?;
    match skip {
        Some(s) => g.add(out, s),
        None => Ok(out),
    }
}

/// Flattens the `a_in × a_in` angular block into channels and maps it with
/// a 1×1 conv to `C_out · a_out²` channels laid out as `(c, u, v)`.
pub fn asr_head<T: Real>(
    g: &mut Graph<T>,
    p: &Bound,
    f: Var,
    conv: &ConvParams,
    a_out: usize,
) -> Result<Var> {
    let s = g.shape(f).to_vec();
    let t = g.reshape(f, &[s[0], s[1] * s[2] * s[3], s[4], s[5]])?;
    let t = conv.apply(g, p, t)?;
    let co = g.shape(t)[1];
    check_divisible("angular head channels", co, a_out * a_out)?;
    g.reshape(t, &[s[0], co / (a_out * a_out), a_out, a_out, s[4], s[5]])
}
