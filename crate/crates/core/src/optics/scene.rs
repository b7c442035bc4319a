use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LfError, Result};
use crate::plane::Plane;

use super::scale_factor;

/// One planar layer of the scene.
///
/// The texture covers the world rectangle of size `extent = [width, height]`
/// centred on `center = [cx, cy]`. Texel `(r, c)` has its centre at
/// `cx − width/2 + (c + 0.5)·width/cols` (same for rows). Inside the
/// rectangle values are bilinear samples; outside it the layer shows
/// `oob_value` and is opaque only when `outside_opaque` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub depth: f64,
    pub texture: Plane,
    pub extent: [f64; 2],
    pub center: [f64; 2],
    pub oob_value: f64,
    /// Binary mask on the texture grid (`> 0.5` means opaque).
    pub opacity: Option<Plane>,
    pub outside_opaque: bool,
}

impl LayerSpec {
    /// Fully opaque layer without a mask.
    pub fn opaque(depth: f64, texture: Plane, extent: [f64; 2]) -> Self {
        Self {
            depth,
            texture,
            extent,
            center: [0.0, 0.0],
            oob_value: 0.0,
            opacity: None,
            outside_opaque: true,
        }
    }

    fn tex_coords(&self, wx: f64, wy: f64) -> Option<(f64, f64)> {
        let [w, h] = self.extent;
        let fx = (wx - (self.center[0] - w / 2.0)) / w;
        let fy = (wy - (self.center[1] - h / 2.0)) / h;
        if !(0.0..1.0).contains(&fx) || !(0.0..1.0).contains(&fy) {
            return None;
        }
        let col = fx * self.texture.cols() as f64 - 0.5;
        let row = fy * self.texture.rows() as f64 - 0.5;
        Some((row, col))
    }

    /// Texture value at world position, ignoring opacity.
    pub fn sample(&self, wx: f64, wy: f64) -> f64 {
        match self.tex_coords(wx, wy) {
            Some((r, c)) => self.texture.sample_bilinear(r, c),
            None => self.oob_value,
        }
    }

    pub fn is_opaque_at(&self, wx: f64, wy: f64) -> bool {
        match self.tex_coords(wx, wy) {
            Some((r, c)) => match &self.opacity {
                None => true,
                Some(m) => {
                    let ri = (r + 0.5).floor().clamp(0.0, (m.rows() - 1) as f64) as usize;
                    let ci = (c + 0.5).floor().clamp(0.0, (m.cols() - 1) as f64) as usize;
                    m.get(ri, ci) > 0.5
                }
            },
            None => self.outside_opaque,
        }
    }

    /// Value seen by the ray `(up, vp) -> (xp, yp)` if it hits an opaque
    /// part of this layer.
    pub(crate) fn hit(&self, z0: f64, up: f64, vp: f64, yp: f64, xp: f64) -> Option<f64> {
        let s = scale_factor(self.depth, z0);
        let wx = s * xp - up * self.depth / z0;
        let wy = s * yp - vp * self.depth / z0;
        self.is_opaque_at(wx, wy).then(|| self.sample(wx, wy))
    }

    fn validate(&self, z0: f64) -> Result<()> {
        if !self.depth.is_finite() || self.depth <= -z0 {
            return Err(LfError::config(format!(
                "layer depth {} must be finite and greater than -z0 ({})",
                self.depth, -z0
            )));
        }
        if !(self.extent[0] > 0.0 && self.extent[1] > 0.0) {
            return Err(LfError::config("layer extent must be positive"));
        }
        if self.texture.rows() == 0 || self.texture.cols() == 0 {
            return Err(LfError::config("empty layer texture"));
        }
        let in_unit = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        if !self.texture.data().iter().all(|&v| in_unit(v)) || !in_unit(self.oob_value) {
            return Err(LfError::config("texture values must lie in [0, 1]"));
        }
        if let Some(m) = &self.opacity {
            if !m.same_shape(&self.texture) {
                return Err(LfError::config("opacity mask must match the texture grid"));
            }
        }
        Ok(())
    }
}

/// Ordered collection of layers plus the value of rays that hit nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub layers: Vec<LayerSpec>,
    pub background: f64,
}

impl SceneSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Self {
        Self {
            layers,
            background: 0.0,
        }
    }

    pub fn validate(&self, z0: f64) -> Result<()> {
        if self.layers.is_empty() {
            return Err(LfError::config("scene needs at least one layer"));
        }
        self.layers.iter().try_for_each(|l| l.validate(z0))
    }

    /// One textured fronto-parallel plane at depth `z` that covers every ray
    /// of `optics`. The texel pitch is `|s(z)|·p / texels_per_pixel`, so the
    /// texture is seen at the same rate whatever the depth. Wavelengths in
    /// `params` are given in image pixels.
    pub fn single_plane(
        z: f64,
        optics: &super::OpticsConfig,
        texels_per_pixel: f64,
        params: &super::TextureParams,
        seed: u64,
    ) -> Self {
        let layer = plane_layer(z, optics, texels_per_pixel, params, seed);
        SceneSpec::new(vec![layer])
    }

    /// Layers sorted nearest-to-camera first (stable for equal depths).
    pub(crate) fn front_to_back(&self) -> Vec<&LayerSpec> {
        let mut v: Vec<&LayerSpec> = self.layers.iter().collect();
        v.sort_by(|a, b| a.depth.total_cmp(&b.depth));
        v
    }

    /// Reads a scene description. Texture and mask paths are resolved
    /// relative to the JSON file's directory.
    ///
    /// ```json
    /// { "background": 0.0,
    ///   "layers": [ { "depth": 1.0, "texture": "tex.png", "extent": [64, 64],
    ///                 "center": [0, 0], "oob_value": 0.0,
    ///                 "opacity": "mask.png", "outside_opaque": false } ] }
    /// ```
    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LfError::io(path, e))?;
        let doc: SceneDoc = serde_json::from_str(&text)
            .map_err(|e| LfError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut layers = Vec::with_capacity(doc.layers.len());
        for l in doc.layers {
            let texture = crate::io::read_png_gray(&base.join(&l.texture))?;
            let opacity = match &l.opacity {
                Some(p) => Some(crate::io::read_png_gray(&base.join(p))?),
                None => None,
            };
            layers.push(LayerSpec {
                depth: l.depth,
                texture,
                extent: l.extent,
                center: l.center,
                oob_value: l.oob_value,
                outside_opaque: l.outside_opaque.unwrap_or(opacity.is_none()),
                opacity,
            });
        }
        Ok(SceneSpec {
            layers,
            background: doc.background,
        })
    }
}

/// Opaque textured layer at depth `z` covering the whole field of view.
pub fn plane_layer(
    z: f64,
    optics: &super::OpticsConfig,
    texels_per_pixel: f64,
    params: &super::TextureParams,
    seed: u64,
) -> LayerSpec {
    let s = scale_factor(z, optics.z0).abs().max(1e-3);
    let reach = |n_ang: usize, n_sp: usize| {
        let sp = optics.spatial_coord(n_sp - 1, n_sp).abs() + optics.pixel_pitch;
        let ang = optics.angular_offset(n_ang - 1, n_ang).abs();
        s * sp + ang * (z / optics.z0).abs()
    };
    let pitch = s * optics.pixel_pitch / texels_per_pixel;
    let wx = 2.0 * reach(optics.angular[0], optics.spatial[1]) + 4.0 * pitch;
    let wy = 2.0 * reach(optics.angular[1], optics.spatial[0]) + 4.0 * pitch;
    let cols = (wx / pitch).ceil() as usize;
    let rows = (wy / pitch).ceil() as usize;
    let tex_params = super::TextureParams {
        min_wavelength: params.min_wavelength * texels_per_pixel,
        max_wavelength: params.max_wavelength * texels_per_pixel,
        ..*params
    };
    let texture = super::smooth_texture(rows, cols, &tex_params, seed);
    LayerSpec::opaque(z, texture, [cols as f64 * pitch, rows as f64 * pitch])
}

/// Settings for [`random_scene`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomSceneParams {
    /// Background plane plus `layers − 1` rectangular occluders.
    pub layers: usize,
    /// Disparities are drawn uniformly from `[−max, max]` pixels per view.
    pub max_disparity: f64,
    pub texels_per_pixel: f64,
    pub texture: super::TextureParams,
}

impl Default for RandomSceneParams {
    fn default() -> Self {
        Self {
            layers: 3,
            max_disparity: 0.5,
            texels_per_pixel: 2.0,
            texture: super::TextureParams::default(),
        }
    }
}

/// Textured background plane and rectangular occluders at random
/// disparities; fully determined by `seed`.
pub fn random_scene(optics: &super::OpticsConfig, params: &RandomSceneParams, seed: u64) -> Result<SceneSpec> {
    let limit = optics.baseline / optics.pixel_pitch;
    if params.layers == 0 || !(params.max_disparity >= 0.0 && params.max_disparity < limit) {
        return Err(LfError::config(format!(
            "random scene needs >= 1 layer and max disparity in [0, {limit})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = params.max_disparity;
    let draw_depth = |rng: &mut ChaCha8Rng| {
        let d = if m > 0.0 { rng.gen_range(-m..=m) } else { 0.0 };
        super::depth_for_disparity(d, optics)
    };
    let mut layers = Vec::with_capacity(params.layers);
    for k in 0..params.layers {
        let z = draw_depth(&mut rng);
        let mut layer = plane_layer(z, optics, params.texels_per_pixel, &params.texture, rng.gen());
        if k > 0 {
            let (rows, cols) = (layer.texture.rows(), layer.texture.cols());
            let (h, w) = (rng.gen_range(0.2..0.5) * rows as f64, rng.gen_range(0.2..0.5) * cols as f64);
            let (r0, c0) = (rng.gen_range(0.0..rows as f64 - h), rng.gen_range(0.0..cols as f64 - w));
            layer.opacity = Some(Plane::from_fn(rows, cols, |r, c| {
                let (r, c) = (r as f64, c as f64);
                (r >= r0 && r < r0 + h && c >= c0 && c < c0 + w) as u8 as f64
            }));
            layer.outside_opaque = false;
        }
        layers.push(layer);
    }
    Ok(SceneSpec::new(layers))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    layers: Vec<LayerDoc>,
    #[serde(default)]
    background: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    depth: f64,
    texture: String,
    extent: [f64; 2],
    #[serde(default)]
    center: [f64; 2],
    #[serde(default)]
    oob_value: f64,
    #[serde(default)]
    opacity: Option<String>,
    #[serde(default)]
    outside_opaque: Option<bool>,
}
