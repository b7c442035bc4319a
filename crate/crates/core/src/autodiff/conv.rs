//! 2D cross-correlation via grouped im2col + GEMM.
//!
//! Samples are processed in fixed groups whose im2col buffer stays under
//! [`GROUP_BUDGET`] elements. Groups run in parallel; weight gradients are
//! accumulated per group and summed in group order, so results do not depend
//! on the thread count.

use crate::error::{LfError, Result};
use crate::par;

use super::real::{gemm, Mat};
use super::Real;

const GROUP_BUDGET: usize = 1 << 17;

/// Stride, zero padding and dilation, each as `[rows, cols]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dSpec {
    pub stride: [usize; 2],
    pub padding: [usize; 2],
    pub dilation: [usize; 2],
}

impl Default for Conv2dSpec {
    fn default() -> Self {
        Self {
            stride: [1, 1],
            padding: [0, 0],
            dilation: [1, 1],
        }
    }
}

impl Conv2dSpec {
    /// Stride 1 with symmetric padding.
    pub fn padded(ph: usize, pw: usize) -> Self {
        Self {
            padding: [ph, pw],
            ..Self::default()
        }
    }

    pub fn strided(sh: usize, sw: usize) -> Self {
        Self {
            stride: [sh, sw],
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvDims {
    pub n: usize,
    pub ci: usize,
    pub h: usize,
    pub w: usize,
    pub co: usize,
    pub kh: usize,
    pub kw: usize,
    pub ho: usize,
    pub wo: usize,
    pub spec: Conv2dSpec,
}

impl ConvDims {
    pub fn new(x: &[usize], k: &[usize], spec: Conv2dSpec) -> Result<Self> {
        if x.len() != 4 || k.len() != 4 {
            return Err(LfError::shape(format!(
                "conv2d expects [N, C, H, W] input and [O, C, kh, kw] kernel, got {x:?} and {k:?}"
            )));
        }
        if x[1] != k[1] {
            return Err(LfError::shape(format!(
                "conv2d input has {} channels, kernel expects {}",
                x[1], k[1]
            )));
        }
        if spec.stride.contains(&0) || spec.dilation.contains(&0) || k[2] == 0 || k[3] == 0 {
            return Err(LfError::invalid("conv2d stride, dilation and kernel must be positive"));
        }
        let out = |len: usize, kk: usize, i: usize| -> Result<usize> {
            let span = spec.dilation[i] * (kk - 1) + 1;
            let padded = len + 2 * spec.padding[i];
            if padded < span {
                return Err(LfError::shape(format!(
                    "conv2d kernel span {span} exceeds padded input {padded}"
                )));
            }
            Ok((padded - span) / spec.stride[i] + 1)
        };
        Ok(Self {
            n: x[0],
            ci: x[1],
            h: x[2],
            w: x[3],
            co: k[0],
            kh: k[2],
            kw: k[3],
            ho: out(x[2], k[2], 0)?,
            wo: out(x[3], k[3], 1)?,
            spec,
        })
    }

    fn k(&self) -> usize {
        self.ci * self.kh * self.kw
    }

    fn p(&self) -> usize {
        self.ho * self.wo
    }

    fn group(&self) -> usize {
        (GROUP_BUDGET / (self.k() * self.p()).max(1)).clamp(1, self.n.max(1))
    }

    pub fn out_shape(&self) -> Vec<usize> {
        vec![self.n, self.co, self.ho, self.wo]
    }

    /// Visits every in-bounds run of taps of one sample as
    /// `(row of cols, first output position, first input offset, length)`;
    /// consecutive taps of a run are `stride[1]` apart in the input.
    #[inline]
    fn for_each_run(&self, mut f: impl FnMut(usize, usize, usize, usize)) {
        let [sh, sw] = self.spec.stride;
        let [ph, pw] = self.spec.padding;
        let [dh, dw] = self.spec.dilation;
        for j in 0..self.kw {
            // output columns whose tap lands inside the row
            let shift = j * dw;
            let lo = if pw > shift { (pw - shift).div_ceil(sw) } else { 0 };
            let hi = if self.w + pw > shift {
                ((self.w + pw - shift - 1) / sw + 1).min(self.wo)
            } else {
                0
            };
            if lo >= hi {
                continue;
            }
            let ix0 = lo * sw + shift - pw;
            for c in 0..self.ci {
                for i in 0..self.kh {
                    let row = (c * self.kh + i) * self.kw + j;
                    for oy in 0..self.ho {
                        let iy = (oy * sh + i * dh) as isize - ph as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let base = (c * self.h + iy as usize) * self.w;
                        f(row, oy * self.wo + lo, base + ix0, hi - lo);
                    }
                }
            }
        }
    }

    /// Fills `cols[K, g·P]` for the samples of one group.
    fn im2col<T: Real>(&self, x: &[T], first: usize, count: usize) -> Vec<T> {
        let (p, ld) = (self.p(), count * self.p());
        let sample = self.ci * self.h * self.w;
        let sw = self.spec.stride[1];
        let mut cols = vec![T::zero(); self.k() * ld];
        for g in 0..count {
            let xs = &x[(first + g) * sample..(first + g + 1) * sample];
            self.for_each_run(|row, pos, off, len| {
                let dst = &mut cols[row * ld + g * p + pos..][..len];
                if sw == 1 {
                    dst.copy_from_slice(&xs[off..off + len]);
                } else {
                    for (t, d) in dst.iter_mut().enumerate() {
                        *d = xs[off + t * sw];
                    }
                }
            });
        }
        cols
    }

    fn col2im<T: Real>(&self, cols: &[T], count: usize, dx: &mut [T]) {
        let (p, ld) = (self.p(), count * self.p());
        let sample = self.ci * self.h * self.w;
        let sw = self.spec.stride[1];
        for g in 0..count {
            let xs = &mut dx[g * sample..(g + 1) * sample];
            self.for_each_run(|row, pos, off, len| {
                let src = &cols[row * ld + g * p + pos..][..len];
                for (t, &v) in src.iter().enumerate() {
                    xs[off + t * sw] += v;
                }
            });
        }
    }
}

pub(crate) fn forward<T: Real>(x: &[T], w: &[T], b: Option<&[T]>, d: &ConvDims) -> Vec<T> {
    let (p, k, g) = (d.p(), d.k(), d.group());
    let mut out = vec![T::zero(); d.n * d.co * p];
    par::for_each_chunk_mut(&mut out, g * d.co * p, |gi, chunk| {
        let first = gi * g;
        let count = chunk.len() / (d.co * p);
        let ld = count * p;
        let cols = d.im2col(x, first, count);
        let mut tmp = vec![T::zero(); d.co * ld];
        gemm(d.co, k, ld, Mat::rm(w, k), Mat::rm(&cols, ld), T::zero(), &mut tmp, ld);
        for s in 0..count {
            for o in 0..d.co {
                let bias = b.map_or(T::zero(), |b| b[o]);
                let dst = &mut chunk[(s * d.co + o) * p..(s * d.co + o + 1) * p];
                let src = &tmp[o * ld + s * p..o * ld + (s + 1) * p];
                for (dv, &sv) in dst.iter_mut().zip(src) {
                    *dv = sv + bias;
                }
            }
        }
    });
    out
}

pub(crate) struct ConvGrads<T> {
    pub dx: Option<Vec<T>>,
    pub dw: Vec<T>,
    pub db: Vec<T>,
}

pub(crate) fn backward<T: Real>(
    x: &[T],
    w: &[T],
    dy: &[T],
    d: &ConvDims,
    need_dx: bool,
    need_dw: bool,
) -> ConvGrads<T> {
    let (p, k, g) = (d.p(), d.k(), d.group());
    let groups = d.n.div_ceil(g);
    let sample = d.ci * d.h * d.w;
    let parts = par::map_range(groups, |gi| {
        let first = gi * g;
        let count = g.min(d.n - first);
        let ld = count * p;
        let mut tmp = vec![T::zero(); d.co * ld];
        for s in 0..count {
            for o in 0..d.co {
                let src = &dy[((first + s) * d.co + o) * p..((first + s) * d.co + o + 1) * p];
                tmp[o * ld + s * p..o * ld + (s + 1) * p].copy_from_slice(src);
            }
        }
        let db: Vec<T> = (0..d.co).map(|o| tmp[o * ld..(o + 1) * ld].iter().copied().sum()).collect();
        let mut dw = Vec::new();
        if need_dw {
            let cols = d.im2col(x, first, count);
            dw = vec![T::zero(); d.co * k];
            gemm(d.co, ld, k, Mat::rm(&tmp, ld), Mat::rm_t(&cols, ld), T::zero(), &mut dw, k);
        }
        let mut dx = Vec::new();
        if need_dx {
            let mut dcols = vec![T::zero(); k * ld];
            gemm(k, d.co, ld, Mat::rm_t(w, k), Mat::rm(&tmp, ld), T::zero(), &mut dcols, ld);
            dx = vec![T::zero(); count * sample];
            d.col2im(&dcols, count, &mut dx);
        }
        (dw, db, dx)
    });
    let mut dw = vec![T::zero(); if need_dw { d.co * k } else { 0 }];
    let mut db = vec![T::zero(); d.co];
    let mut dx = need_dx.then(|| Vec::with_capacity(d.n * sample));
    for (pw, pb, px) in parts {
        for (a, v) in dw.iter_mut().zip(pw) {
            *a += v;
        }
        for (a, v) in db.iter_mut().zip(pb) {
            *a += v;
        }
        if let Some(dx) = dx.as_mut() {
            dx.extend(px);
        }
    }
    ConvGrads { dx, dw, db }
}
