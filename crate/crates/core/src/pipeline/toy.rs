//! A handful of rendered ×s patches small enough to overfit in minutes;
//! used to check that the training loop actually learns.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lightfield::LightField4D;
use crate::optics::{random_scene, render_lf, OpticsConfig, RandomSceneParams, TextureParams};

use super::{make_ssr_pair, score_scene, Pair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyDataset {
    pub scenes: usize,
    /// HR patch side.
    pub size: usize,
    pub angular: usize,
    pub scale: usize,
    /// Shortest texture wavelength in HR pixels. At `2·scale` nothing in
    /// the target lies above the LR Nyquist limit.
    pub min_wavelength: f64,
    pub max_disparity: f64,
    pub seed: u64,
}

impl Default for ToyDataset {
    fn default() -> Self {
        Self {
            scenes: 8,
            size: 32,
            angular: 3,
            scale: 2,
            min_wavelength: 4.0,
            max_disparity: 1.0,
            seed: 0,
        }
    }
}

impl ToyDataset {
    pub fn optics(&self) -> OpticsConfig {
        OpticsConfig {
            z0: 10.0,
            baseline: 2.0,
            pixel_pitch: 1.0,
            angular: [self.angular; 2],
            spatial: [self.size; 2],
        }
    }

    /// One HR/LR pair per rendered scene.
    pub fn pairs(&self) -> Result<Vec<Pair>> {
        let optics = self.optics();
        let params = RandomSceneParams {
            max_disparity: self.max_disparity,
            texture: TextureParams {
                components: 24,
                min_wavelength: self.min_wavelength,
                max_wavelength: 16.0,
            },
            ..Default::default()
        };
        (0..self.scenes as u64)
            .map(|k| {
                let hr = render_lf(&random_scene(&optics, &params, self.seed.wrapping_add(k))?, &optics)?;
                let (input, target) = make_ssr_pair(&hr, self.scale)?;
                Ok(Pair { input, target })
            })
            .collect()
    }
}

/// Mean over pairs of the per-pair mean view PSNR.
pub fn mean_psnr(preds: &[LightField4D], pairs: &[Pair]) -> Result<f64> {
    let mut total = 0.0;
    for (k, (p, t)) in preds.iter().zip(pairs).enumerate() {
        total += score_scene(&k.to_string(), p, &t.target, &[])?.psnr;
    }
    Ok(total / pairs.len().max(1) as f64)
}
