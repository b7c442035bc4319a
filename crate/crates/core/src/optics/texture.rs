use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::plane::Plane;

/// Band-limited random texture: a sum of plane waves with random direction,
/// phase and amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextureParams {
    pub components: usize,
    /// Shortest wavelength, in texels.
    pub min_wavelength: f64,
    /// Longest wavelength, in texels.
    pub max_wavelength: f64,
}

impl Default for TextureParams {
    fn default() -> Self {
        Self {
            components: 24,
            min_wavelength: 3.0,
            max_wavelength: 24.0,
        }
    }
}

/// Generates a texture with values rescaled to `[0.05, 0.95]`.
pub fn smooth_texture(rows: usize, cols: usize, params: &TextureParams, seed: u64) -> Plane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..params.components.max(1))
        .map(|_| {
            let theta = rng.gen_range(0.0..std::f64::consts::PI);
            let lambda = rng.gen_range(params.min_wavelength..=params.max_wavelength);
            let k = std::f64::consts::TAU / lambda;
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let amp = rng.gen_range(0.3..1.0);
            (k * theta.cos(), k * theta.sin(), phase, amp)
        })
        .collect();
    let raw = Plane::from_fn(rows, cols, |r, c| {
        waves
            .iter()
            .map(|&(kx, ky, ph, a)| a * (kx * c as f64 + ky * r as f64 + ph).cos())
            .sum()
    });
    let (lo, hi) = raw
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = (hi - lo).max(1e-12);
    raw.map(|v| 0.05 + 0.9 * (v - lo) / span)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn texture_is_deterministic_and_in_range() {
        let p = TextureParams::default();
        let a = smooth_texture(32, 40, &p, 5);
        let b = smooth_texture(32, 40, &p, 5);
        assert_eq!(a, b);
        assert!(a.data().iter().all(|&v| (0.05..=0.95 + 1e-12).contains(&v)));
        assert_ne!(a, smooth_texture(32, 40, &p, 6));
    }
}
