//! Layered Lambertian light-field renderer under the delta-PSF imaging model.
//!
//! A ray leaves the camera-plane position `(u, v)` at depth `-z0`, crosses the
//! focal plane (depth 0) at `(x, y)` and meets a layer at depth `z` at
//! `(s(z)·x − u·z/z0, s(z)·y − v·z/z0)` with `s(z) = 1 + z/z0`. Layers are
//! resolved front to back; the first opaque hit wins. There is no blur.

mod geometry;
mod scene;
mod slope;
mod texture;

pub use geometry::{depth_for_disparity, disparity_pixels, epi_line_slope, scale_factor, vsi_equivalent_depth};
pub use scene::{plane_layer, random_scene, LayerSpec, RandomSceneParams, SceneSpec};
pub use slope::{fit_epi_slope, fit_epi_slope_detailed, SlopeFit};
pub use texture::{smooth_texture, TextureParams};

use serde::{Deserialize, Serialize};

use crate::error::{LfError, Result};
use crate::lightfield::{LfDims, LightField4D};
use crate::par;
use crate::plane::Plane;

/// Camera geometry and sampling grid.
///
/// Angular index `a` of an axis with `n` samples sits at
/// `(a − (n−1)/2)·baseline`; spatial index `i` of an axis with `m` pixels at
/// `(i − (m−1)/2)·pixel_pitch` on the focal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsConfig {
    pub z0: f64,
    pub baseline: f64,
    pub pixel_pitch: f64,
    /// `[U, V]`
    pub angular: [usize; 2],
    /// `[Y, X]`
    pub spatial: [usize; 2],
}

impl OpticsConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.z0) || !pos(self.baseline) || !pos(self.pixel_pitch) {
            return Err(LfError::config(format!(
                "z0, baseline and pixel_pitch must be positive, got {}, {}, {}",
                self.z0, self.baseline, self.pixel_pitch
            )));
        }
        if self.angular.contains(&0) || self.spatial.contains(&0) {
            return Err(LfError::config("angular and spatial counts must be >= 1"));
        }
        Ok(())
    }

    pub fn dims(&self) -> LfDims {
        LfDims::new(
            1,
            self.angular[0],
            self.angular[1],
            self.spatial[0],
            self.spatial[1],
        )
    }

    /// Physical camera-plane offset of angular index `a` along an axis of `n`.
    pub fn angular_offset(&self, a: usize, n: usize) -> f64 {
        (a as f64 - (n as f64 - 1.0) / 2.0) * self.baseline
    }

    /// Physical focal-plane coordinate of pixel index `i` along an axis of `m`.
    pub fn spatial_coord(&self, i: usize, m: usize) -> f64 {
        (i as f64 - (m as f64 - 1.0) / 2.0) * self.pixel_pitch
    }

    pub fn u_offset(&self, u: usize) -> f64 {
        self.angular_offset(u, self.angular[0])
    }

    pub fn v_offset(&self, v: usize) -> f64 {
        self.angular_offset(v, self.angular[1])
    }

    pub fn x_coord(&self, x: usize) -> f64 {
        self.spatial_coord(x, self.spatial[1])
    }

    pub fn y_coord(&self, y: usize) -> f64 {
        self.spatial_coord(y, self.spatial[0])
    }

    /// World coordinate along the `x` direction seen by pixel `x` of view `u`
    /// on a plane at depth `z`.
    pub fn world_x(&self, z: f64, u: usize, x: usize) -> f64 {
        scale_factor(z, self.z0) * self.x_coord(x) - self.u_offset(u) * z / self.z0
    }

    /// Continuous pixel column at which view `u` sees world coordinate `wx`
    /// on a plane at depth `z`.
    pub fn project_x(&self, z: f64, u: usize, wx: f64) -> f64 {
        let xp = (wx + self.u_offset(u) * z / self.z0) / scale_factor(z, self.z0);
        xp / self.pixel_pitch + (self.spatial[1] as f64 - 1.0) / 2.0
    }
}

/// Renders `scene` as a single-channel light field.
///
/// Views are rendered independently (in parallel when enabled); the result
/// does not depend on the thread count.
pub fn render_lf(scene: &SceneSpec, optics: &OpticsConfig) -> Result<LightField4D> {
    optics.validate()?;
    scene.validate(optics.z0)?;
    let order = scene.front_to_back();
    let [nu, nv] = optics.angular;
    let [ny, nx] = optics.spatial;
    let views = par::map_range(nu * nv, |idx| {
        let (u, v) = (idx / nv, idx % nv);
        let (up, vp) = (optics.u_offset(u), optics.v_offset(v));
        Plane::from_fn(ny, nx, |y, x| {
            let (yp, xp) = (optics.y_coord(y), optics.x_coord(x));
            order
                .iter()
                .find_map(|layer| layer.hit(optics.z0, up, vp, yp, xp))
                .unwrap_or(scene.background)
        })
    });
    LightField4D::from_views(nu, nv, &views)
}

/// Image of a single layer placed at depth `z`, observed from camera-plane
/// offset `(up, vp)`, ignoring opacity.
///
/// `z` may lie outside the physical range: with `s(z) < 0` this yields the
/// mirrored virtual monocular image used when relating virtual-slit images to
/// ordinary views.
pub fn render_layer_view(layer: &LayerSpec, optics: &OpticsConfig, z: f64, up: f64, vp: f64) -> Plane {
    let [ny, nx] = optics.spatial;
    let s = scale_factor(z, optics.z0);
    Plane::from_fn(ny, nx, |y, x| {
        let wx = s * optics.x_coord(x) - up * z / optics.z0;
        let wy = s * optics.y_coord(y) - vp * z / optics.z0;
        layer.sample(wx, wy)
    })
}
