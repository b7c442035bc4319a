//! Training/evaluation pairs: bicubic degradation, patch grids, corner-view
//! sampling and paired augmentation.

use rand::Rng;

use crate::error::{check_divisible, LfError, Result};
use crate::lightfield::{GeometricOp, LightField4D};

use super::resize::resize_lf;

/// Input/target light fields of one example.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub input: LightField4D,
    pub target: LightField4D,
}

/// Angular size of the dense grid in the angular task and the stride
/// between the sparse input views.
pub const ASR_DENSE: usize = 7;
pub const ASR_STRIDE: usize = 6;

/// Per-view bicubic ↓`alpha` of `hr`; returns `(lr, hr)`.
pub fn make_ssr_pair(hr: &LightField4D, alpha: usize) -> Result<(LightField4D, LightField4D)> {
    if alpha == 0 {
        return Err(LfError::invalid("scale factor must be positive"));
    }
    let d = hr.dims();
    check_divisible("spatial height", d.y, alpha)?;
    check_divisible("spatial width", d.x, alpha)?;
    let lr = resize_lf(hr, 1.0 / alpha as f64)?;
    Ok((lr, hr.clone()))
}

/// Top-left corners of a `size`×`size` grid with step `stride`, row-major.
pub fn patch_origins(h: usize, w: usize, size: usize, stride: usize) -> Result<Vec<(usize, usize)>> {
    if size == 0 || stride == 0 {
        return Err(LfError::invalid("patch size and stride must be positive"));
    }
    if size > h || size > w {
        return Err(LfError::shape(format!(
            "patch size {size} exceeds spatial size {h}x{w}"
        )));
    }
    let ys = (0..=h - size).step_by(stride);
    Ok(ys
        .flat_map(|y| (0..=w - size).step_by(stride).map(move |x| (y, x)))
        .collect())
}

pub fn crop_patches(lf: &LightField4D, size: usize, stride: usize) -> Result<Vec<LightField4D>> {
    let d = lf.dims();
    patch_origins(d.y, d.x, size, stride)?
        .into_iter()
        .map(|(y, x)| lf.crop(y, x, size, size))
        .collect()
}

/// HR patches of `patch` pixels, each degraded independently.
pub fn ssr_patch_pairs(hr: &LightField4D, alpha: usize, patch: usize, stride: usize) -> Result<Vec<Pair>> {
    check_divisible("patch size", patch, alpha)?;
    crop_patches(hr, patch, stride)?
        .into_iter()
        .map(|p| make_ssr_pair(&p, alpha).map(|(input, target)| Pair { input, target }))
        .collect()
}

/// Four corner views of a 7×7 grid; returns `(sparse 2×2, dense)`.
pub fn make_asr_pair(dense: &LightField4D) -> Result<(LightField4D, LightField4D)> {
    let d = dense.dims();
    if d.u != ASR_DENSE || d.v != ASR_DENSE {
        return Err(LfError::shape(format!(
            "angular pairs need a {ASR_DENSE}x{ASR_DENSE} grid, got {}x{}",
            d.u, d.v
        )));
    }
    let corners = [0, ASR_STRIDE];
    Ok((dense.select_angles(&corners, &corners)?, dense.clone()))
}

/// Angular positions of the sparse inputs inside the dense grid.
pub fn asr_input_views() -> Vec<(usize, usize)> {
    vec![(0, 0), (0, ASR_STRIDE), (ASR_STRIDE, 0), (ASR_STRIDE, ASR_STRIDE)]
}

pub fn asr_patch_pairs(dense: &LightField4D, patch: usize, stride: usize) -> Result<Vec<Pair>> {
    crop_patches(dense, patch, stride)?
        .iter()
        .map(|p| make_asr_pair(p).map(|(input, target)| Pair { input, target }))
        .collect()
}

/// Applies the same geometric transform to input and target.
pub fn augment_pair(pair: &Pair, op: GeometricOp) -> Result<Pair> {
    Ok(Pair {
        input: op.apply(&pair.input)?,
        target: op.apply(&pair.target)?,
    })
}

/// Random flip/rotation draw: independent horizontal flip, vertical flip
/// and rotation, each with probability ½.
pub fn random_augment(pair: &Pair, rng: &mut impl Rng) -> Result<Pair> {
    let mut out = pair.clone();
    for op in [GeometricOp::FlipH, GeometricOp::FlipV, GeometricOp::Rot90] {
        if rng.gen_bool(0.5) {
            out = augment_pair(&out, op)?;
        }
    }
    Ok(out)
}
