//! The six-subspace convolution block.
//!
//! Each branch rearranges the `[B, C, U, V, Y, X]` features so one subspace
//! plane becomes the image and the two remaining axes join the batch, then
//! convolves:
//!
//! | branch   | plane (rows × cols) | kernel          | output channels |
//! |----------|---------------------|-----------------|-----------------|
//! | SAI      | Y × X               | 3 × 3, pad 1    | C               |
//! | MacPI    | U × V               | A × A, stride A | C·A²            |
//! | EPI, VSI | angle × spatial     | A × K, pad (0, K/2) | C·A         |
//!
//! with `K = 2⌊A/2⌋ + 1`. The strided branches collapse the angular rows, and
//! their extra channels are moved back onto the angular axes (channel
//! `c·A² + i·A + j` → angle `(i, j)`, or `c·A + i` → `i`), so every branch
//! returns the input shape.

use crate::autodiff::{Conv2dSpec, Graph, Real, Var};
use crate::error::{LfError, Result};
use crate::lightfield::SubspaceId;

use super::layers::{inv, per_view, pointwise, Bound, ConvParams, Init, LRELU_SLOPE};

#[derive(Debug, Clone, PartialEq)]
pub struct BranchParams {
    pub id: SubspaceId,
    pub conv: ConvParams,
    pub mix: ConvParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct C42Params {
    pub branches: Vec<BranchParams>,
    pub fuse: ConvParams,
    pub spatial: ConvParams,
}

/// Kernel shape, spec and channel expansion of a branch's subspace conv.
pub fn branch_kernel(id: SubspaceId, a: usize) -> ([usize; 2], Conv2dSpec, usize) {
    match id {
        SubspaceId::Sai => ([3, 3], Conv2dSpec::padded(1, 1), 1),
        SubspaceId::MacPi => ([a, a], Conv2dSpec::strided(a, a), a * a),
        _ => {
            let k = 2 * (a / 2) + 1;
            ([a, k], Conv2dSpec::padded(0, k / 2), a)
        }
    }
}

/// Branches used by a block.
pub fn branch_ids(use_vsi: bool) -> Vec<SubspaceId> {
    SubspaceId::ALL
        .into_iter()
        .filter(|id| use_vsi || !id.is_vsi())
        .collect()
}

impl C42Params {
    /// `zero_tail` zero-initialises the final spatial conv so the fresh block
    /// is the identity.
    pub fn init<T: Real>(
        init: &mut Init<'_, T>,
        prefix: &str,
        c: usize,
        a: usize,
        use_vsi: bool,
        zero_tail: bool,
    ) -> Result<Self> {
        let mut branches = Vec::new();
        for id in branch_ids(use_vsi) {
            let ([kh, kw], spec, e) = branch_kernel(id, a);
            let name = format!("{prefix}.{}", id.name());
            branches.push(BranchParams {
                id,
                conv: init.conv(&format!("{name}.conv"), [c * e, c, kh, kw], spec, false)?,
                mix: init.conv(&format!("{name}.mix"), [c, c, 1, 1], Conv2dSpec::default(), false)?,
            });
        }
        let n = branches.len();
        Ok(Self {
            branches,
            fuse: init.conv(&format!("{prefix}.fuse"), [c, n * c, 1, 1], Conv2dSpec::default(), false)?,
            spatial: init.conv(
                &format!("{prefix}.spatial"),
                [c, c, 3, 3],
                Conv2dSpec::padded(1, 1),
                zero_tail,
            )?,
        })
    }
}

fn check_features<T: Real>(g: &Graph<T>, f: Var) -> Result<[usize; 6]> {
    let s = g.shape(f);
    if s.len() != 6 || s[2] != s[3] {
        return Err(LfError::shape(format!(
            "features must be [B, C, A, A, Y, X], got {s:?}"
        )));
    }
    Ok([s[0], s[1], s[2], s[3], s[4], s[5]])
}

/// Subspace convolution of one branch followed by channel-to-angle; the
/// result has the input's shape.
pub fn branch_forward<T: Real>(
    g: &mut Graph<T>,
    p: &Bound,
    f: Var,
    id: SubspaceId,
    conv: &ConvParams,
) -> Result<Var> {
    let s = check_features(g, f)?;
    let (b0, b1) = id.batch_axes();
    let (r, c) = id.plane_axes();
    // canonical 5-d positions shifted by the leading batch axis
    let perm = [0, b0.position() + 1, b1.position() + 1, 1, r.position() + 1, c.position() + 1];
    let t = g.permute(f, &perm)?;
    let ps = g.shape(t).to_vec();
    let t = g.reshape(t, &[ps[0] * ps[1] * ps[2], ps[3], ps[4], ps[5]])?;
    let y = conv.apply(g, p, t)?;
    let ys = g.shape(y).to_vec();
    // every branch yields C·(rows·cols / out_rows·out_cols) channels in the
    // (c, row offset, col offset) order, so a reshape restores the plane
    if ys[1] * ys[2] * ys[3] != s[1] * ps[4] * ps[5] {
        return Err(LfError::shape(format!(
            "{id} branch produced {ys:?} for plane {}x{}",
            ps[4], ps[5]
        )));
    }
    let y = g.reshape(y, &ps)?;
    g.permute(y, &inv(&perm))
}

/// Full block: branches → LReLU → 1×1 → LReLU, concatenation, 1×1 fusion →
/// LReLU → 3×3 spatial conv, plus the input.
pub fn c42_block<T: Real>(g: &mut Graph<T>, p: &Bound, f: Var, params: &C42Params) -> Result<Var> {
    check_features(g, f)?;
    let mut outs = Vec::with_capacity(params.branches.len());
    for br in &params.branches {
        let y = branch_forward(g, p, f, br.id, &br.conv)?;
        let y = g.leaky_relu(y, LRELU_SLOPE)?;
        let y = pointwise(g, p, y, &br.mix)?;
        outs.push(g.leaky_relu(y, LRELU_SLOPE)?);
    }
    let cat = g.concat(&outs, 1)?;
    let fused = pointwise(g, p, cat, &params.fuse)?;
    let fused = g.leaky_relu(fused, LRELU_SLOPE)?;
    let fused = per_view(g, fused, |g, t| params.spatial.apply(g, p, t))?;
    g.add(fused, f)
}
