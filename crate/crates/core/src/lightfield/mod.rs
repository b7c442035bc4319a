//! The canonical 4D light-field container and its exact rearrangements.
//!
//! Data is stored row-major in the order `[c, u, v, y, x]`. The angular axis
//! `u` pairs with the spatial axis `x` and `v` pairs with `y`: a scene point
//! drifts along `x` as `u` changes and along `y` as `v` changes.

mod augment;
mod shuffle;
mod subspace;

pub use augment::{flip_h_lf, flip_v_lf, rot90_lf, GeometricOp};
pub use shuffle::{
    angle_to_channel, channel_to_angle, from_macpi_image, pixel_shuffle_spatial,
    pixel_unshuffle_spatial, to_macpi_image,
};
pub use subspace::{subspace_unview, subspace_view, Axis, PlaneBatch, SubspaceId};

use serde::{Deserialize, Serialize};

use crate::error::{LfError, Result};
use crate::plane::Plane;

/// Extents of a light field: channels, two angular and two spatial axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LfDims {
    pub c: usize,
    pub u: usize,
    pub v: usize,
    pub y: usize,
    pub x: usize,
}

impl LfDims {
    pub const fn new(c: usize, u: usize, v: usize, y: usize, x: usize) -> Self {
        Self { c, u, v, y, x }
    }

    pub fn numel(&self) -> usize {
        self.c * self.u * self.v * self.y * self.x
    }

    pub fn as_array(&self) -> [usize; 5] {
        [self.c, self.u, self.v, self.y, self.x]
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().contains(&0) {
            return Err(LfError::shape(format!("light-field dims must be >= 1, got {self:?}")));
        }
        Ok(())
    }

    pub fn with_spatial(&self, y: usize, x: usize) -> Self {
        Self { y, x, ..*self }
    }

    pub fn with_angular(&self, u: usize, v: usize) -> Self {
        Self { u, v, ..*self }
    }

    pub fn with_channels(&self, c: usize) -> Self {
        Self { c, ..*self }
    }
}

impl std::fmt::Display for LfDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}x{}x{}", self.c, self.u, self.v, self.y, self.x)
    }
}

/// A light field (or a feature map with the same layout).
#[derive(Debug, Clone, PartialEq)]
pub struct LightField4D {
    dims: LfDims,
    data: Vec<f64>,
}

impl LightField4D {
    /// Wraps `data` laid out as `[c, u, v, y, x]`. Rejects zero extents,
    /// length mismatches and non-finite values.
    pub fn new(dims: LfDims, data: Vec<f64>) -> Result<Self> {
        dims.validate()?;
        if data.len() != dims.numel() {
            return Err(LfError::shape(format!(
                "light field {dims} needs {} values, got {}",
                dims.numel(),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LfError::NonFinite("LightField4D::new"));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: LfDims) -> Result<Self> {
        dims.validate()?;
        Ok(Self {
            dims,
            data: vec![0.0; dims.numel()],
        })
    }

    pub fn from_fn(
        dims: LfDims,
        mut f: impl FnMut(usize, usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        dims.validate()?;
        let mut data = Vec::with_capacity(dims.numel());
        for c in 0..dims.c {
            for u in 0..dims.u {
                for v in 0..dims.v {
                    for y in 0..dims.y {
                        for x in 0..dims.x {
                            data.push(f(c, u, v, y, x));
                        }
                    }
                }
            }
        }
        Self::new(dims, data)
    }

    /// Builds a single-channel light field from sub-aperture images indexed
    /// `views[u * v_count + v]`.
    pub fn from_views(u: usize, v: usize, views: &[Plane]) -> Result<Self> {
        if views.len() != u * v || views.is_empty() {
            return Err(LfError::shape(format!(
                "expected {} views, got {}",
                u * v,
                views.len()
            )));
        }
        let (y, x) = (views[0].rows(), views[0].cols());
        if views.iter().any(|p| p.rows() != y || p.cols() != x) {
            return Err(LfError::shape("views differ in size"));
        }
        let mut data = Vec::with_capacity(u * v * y * x);
        for p in views {
            data.extend_from_slice(p.data());
        }
        Self::new(LfDims::new(1, u, v, y, x), data)
    }

    #[inline]
    pub fn dims(&self) -> LfDims {
        self.dims
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, c: usize, u: usize, v: usize, y: usize, x: usize) -> usize {
        let d = &self.dims;
        (((c * d.u + u) * d.v + v) * d.y + y) * d.x + x
    }

    #[inline]
    pub fn get(&self, c: usize, u: usize, v: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(c, u, v, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, u: usize, v: usize, y: usize, x: usize, value: f64) {
        let i = self.index(c, u, v, y, x);
        self.data[i] = value;
    }

    /// The sub-aperture image of channel `c` at angle `(u, v)`.
    pub fn view(&self, c: usize, u: usize, v: usize) -> Plane {
        let (y, x) = (self.dims.y, self.dims.x);
        let start = self.index(c, u, v, 0, 0);
        Plane::new(y, x, self.data[start..start + y * x].to_vec())
            .expect("view slice has plane size")
    }

    pub fn set_view(&mut self, c: usize, u: usize, v: usize, plane: &Plane) -> Result<()> {
        if plane.rows() != self.dims.y || plane.cols() != self.dims.x {
            return Err(LfError::shape(format!(
                "view {}x{} does not fit {}",
                plane.rows(),
                plane.cols(),
                self.dims
            )));
        }
        let start = self.index(c, u, v, 0, 0);
        self.data[start..start + plane.data().len()].copy_from_slice(plane.data());
        Ok(())
    }

    /// Applies `f` to every sub-aperture image; all outputs must share a size.
    pub fn map_views(&self, mut f: impl FnMut(&Plane) -> Result<Plane>) -> Result<Self> {
        let d = self.dims;
        let mut out: Option<Vec<f64>> = None;
        let mut out_hw = (0, 0);
        for c in 0..d.c {
            for u in 0..d.u {
                for v in 0..d.v {
                    let p = f(&self.view(c, u, v))?;
                    let buf = out.get_or_insert_with(|| {
                        out_hw = (p.rows(), p.cols());
                        Vec::with_capacity(d.c * d.u * d.v * p.rows() * p.cols())
                    });
                    if (p.rows(), p.cols()) != out_hw {
                        return Err(LfError::shape("mapped views differ in size"));
                    }
                    buf.extend_from_slice(p.data());
                }
            }
        }
        Self::new(d.with_spatial(out_hw.0, out_hw.1), out.unwrap_or_default())
    }

    /// Selects a subset of angular positions given as `(u, v)` index lists.
    pub fn select_angles(&self, us: &[usize], vs: &[usize]) -> Result<Self> {
        let d = self.dims;
        if us.iter().any(|&u| u >= d.u) || vs.iter().any(|&v| v >= d.v) {
            return Err(LfError::shape("angular index out of range"));
        }
        let nd = d.with_angular(us.len(), vs.len());
        let mut data = Vec::with_capacity(nd.numel());
        for c in 0..d.c {
            for &u in us {
                for &v in vs {
                    let s = self.index(c, u, v, 0, 0);
                    data.extend_from_slice(&self.data[s..s + d.y * d.x]);
                }
            }
        }
        Self::new(nd, data)
    }

    /// Spatial crop `[y0, y0+h) x [x0, x0+w)` of every view.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Self> {
        let d = self.dims;
        if y0 + h > d.y || x0 + w > d.x || h == 0 || w == 0 {
            return Err(LfError::shape(format!(
                "crop {h}x{w} at ({y0},{x0}) outside {d}"
            )));
        }
        let nd = d.with_spatial(h, w);
        let mut data = Vec::with_capacity(nd.numel());
        for c in 0..d.c {
            for u in 0..d.u {
                for v in 0..d.v {
                    for y in y0..y0 + h {
                        let s = self.index(c, u, v, y, x0);
                        data.extend_from_slice(&self.data[s..s + w]);
                    }
                }
            }
        }
        Self::new(nd, data)
    }

    /// Converts the element type to `f32` (for tensors and file output).
    pub fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&v| v as f32).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_zero_dims() {
        let d = LfDims::new(1, 1, 1, 1, 2);
        assert!(LightField4D::new(d, vec![0.0, f64::NAN]).is_err());
        assert!(LightField4D::zeros(LfDims::new(1, 0, 1, 1, 1)).is_err());
        assert!(LightField4D::new(d, vec![0.0]).is_err());
    }

    #[test]
    fn canonical_index_order() {
        let d = LfDims::new(2, 2, 3, 4, 5);
        let lf = LightField4D::from_fn(d, |c, u, v, y, x| {
            (c * 10000 + u * 1000 + v * 100 + y * 10 + x) as f64
        })
        .unwrap();
        assert_eq!(lf.data()[1], 1.0);
        assert_eq!(lf.data()[5], 10.0);
        assert_eq!(lf.get(1, 1, 2, 3, 4), 11234.0);
        let v = lf.view(0, 1, 2);
        assert_eq!(v.get(3, 4), 1234.0);
    }

    #[test]
    fn select_and_crop() {
        let d = LfDims::new(1, 3, 3, 4, 4);
        let lf = LightField4D::from_fn(d, |_, u, v, y, x| (u * 1000 + v * 100 + y * 10 + x) as f64)
            .unwrap();
        let s = lf.select_angles(&[0, 2], &[0, 2]).unwrap();
        assert_eq!(s.dims(), LfDims::new(1, 2, 2, 4, 4));
        assert_eq!(s.get(0, 1, 1, 0, 0), 2200.0);
        let c = lf.crop(1, 2, 2, 2).unwrap();
        assert_eq!(c.get(0, 0, 0, 0, 0), 12.0);
        assert_eq!(c.get(0, 2, 1, 1, 1), 2123.0);
    }
}
