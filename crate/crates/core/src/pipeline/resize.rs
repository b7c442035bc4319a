//! Separable bicubic resampling (Keys kernel, `a = −0.5`).
//!
//! Output pixel `i` of a length-`n → m` resize sits at source coordinate
//! `(i + ½)·n/m − ½`. When shrinking, the kernel is stretched by `n/m`
//! (anti-aliasing). Taps falling outside the image are dropped and the
//! remaining weights renormalised to sum to one.
//!
//! Each output is evaluated as `r + Σ wⱼ (xⱼ − r)` with `r` the mean of the
//! two taps bracketing the sample position, summing taps in mirrored pairs
//! from the outside in. Constant inputs therefore come out exact, and a
//! mirrored input gives the bit-exact mirrored output. The 2D result is the
//! average of the rows-first and columns-first separable passes, which makes
//! it commute exactly with transposition as well.

use crate::error::{LfError, Result};
use crate::lightfield::LightField4D;
use crate::plane::Plane;

const A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = −0.5`.
pub fn cubic_kernel(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        ((A + 2.0) * t - (A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((A * t - 5.0 * A) * t + 8.0 * A) * t - 4.0 * A
    } else {
        0.0
    }
}

/// Sum of `terms` taken in mirrored pairs from the outside in.
fn mirrored_sum(terms: &[f64]) -> f64 {
    let n = terms.len();
    let mut s = 0.0;
    for k in 0..n / 2 {
        s += terms[k] + terms[n - 1 - k];
    }
    if n % 2 == 1 {
        s += terms[n / 2];
    }
    s
}

/// Taps of one output sample.
#[derive(Debug, Clone, PartialEq)]
struct Taps {
    first: usize,
    weights: Vec<f64>,
    /// Indices of the two taps bracketing the sample position.
    lo: usize,
    hi: usize,
}

fn taps(n_in: usize, n_out: usize) -> Vec<Taps> {
    let ratio = n_in as f64 / n_out as f64;
    let stretch = ratio.max(1.0);
    let support = 2.0 * stretch;
    (0..n_out)
        .map(|i| {
            let src = (i as f64 + 0.5) * ratio - 0.5;
            let lo_j = (src - support).floor() as isize + 1;
            let hi_j = (src + support).ceil() as isize - 1;
            let first = lo_j.max(0) as usize;
            let last = (hi_j.min(n_in as isize - 1)).max(first as isize) as usize;
            let raw: Vec<f64> = (first..=last)
                .map(|j| cubic_kernel((j as f64 - src) / stretch))
                .collect();
            let total = mirrored_sum(&raw);
            let weights = raw.iter().map(|w| w / total).collect();
            let clamp = |v: f64| (v.max(0.0) as usize).min(n_in - 1);
            Taps {
                first,
                weights,
                lo: clamp(src.floor()),
                hi: clamp(src.ceil()),
            }
        })
        .collect()
}

fn apply(t: &Taps, get: impl Fn(usize) -> f64) -> f64 {
    let r = 0.5 * (get(t.lo) + get(t.hi));
    let terms: Vec<f64> = t
        .weights
        .iter()
        .enumerate()
        .map(|(k, w)| w * (get(t.first + k) - r))
        .collect();
    r + mirrored_sum(&terms)
}

fn resize_rows_first(img: &Plane, tr: &[Taps], tc: &[Taps]) -> Plane {
    // columns of every input row, then rows
    let tmp = Plane::from_fn(img.rows(), tc.len(), |r, c| apply(&tc[c], |j| img.get(r, j)));
    Plane::from_fn(tr.len(), tc.len(), |r, c| apply(&tr[r], |j| tmp.get(j, c)))
}

fn resize_cols_first(img: &Plane, tr: &[Taps], tc: &[Taps]) -> Plane {
    let tmp = Plane::from_fn(tr.len(), img.cols(), |r, c| apply(&tr[r], |j| img.get(j, c)));
    Plane::from_fn(tr.len(), tc.len(), |r, c| apply(&tc[c], |j| tmp.get(r, j)))
}

/// Resizes `img` to `rows × cols`.
pub fn bicubic_resize(img: &Plane, rows: usize, cols: usize) -> Result<Plane> {
    if rows == 0 || cols == 0 || img.rows() == 0 || img.cols() == 0 {
        return Err(LfError::invalid(format!(
            "bicubic resize {}x{} -> {rows}x{cols}: sizes must be positive",
            img.rows(),
            img.cols()
        )));
    }
    let tr = taps(img.rows(), rows);
    let tc = taps(img.cols(), cols);
    let a = resize_rows_first(img, &tr, &tc);
    let b = resize_cols_first(img, &tr, &tc);
    Ok(Plane::from_fn(rows, cols, |r, c| 0.5 * (a.get(r, c) + b.get(r, c))))
}

/// Output length for `len · factor`; the product must be a positive integer.
pub fn scaled_len(len: usize, factor: f64) -> Result<usize> {
    let out = len as f64 * factor;
    if !(factor > 0.0) || out < 1.0 || (out - out.round()).abs() > 1e-9 {
        return Err(LfError::invalid(format!(
            "cannot scale length {len} by {factor} to a whole number of pixels"
        )));
    }
    Ok(out.round() as usize)
}

/// Scales `img` by `factor` (e.g. 1/4, 1/2, 2, 4).
pub fn bicubic_scale(img: &Plane, factor: f64) -> Result<Plane> {
    bicubic_resize(img, scaled_len(img.rows(), factor)?, scaled_len(img.cols(), factor)?)
}

/// Per-view bicubic scaling of a light field.
pub fn resize_lf(lf: &LightField4D, factor: f64) -> Result<LightField4D> {
    let d = lf.dims();
    let (y, x) = (scaled_len(d.y, factor)?, scaled_len(d.x, factor)?);
    lf.map_views(|p| bicubic_resize(p, y, x))
}
