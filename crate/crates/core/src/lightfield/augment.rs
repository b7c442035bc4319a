//! Geometry-consistent flips and rotations.
//!
//! Spatial transforms are applied together with the matching angular
//! transform so that epipolar slopes keep their sign: flipping `x` also
//! reverses `u`, flipping `y` reverses `v`, and a quarter turn exchanges the
//! `(u, x)` and `(v, y)` pairs.

use serde::{Deserialize, Serialize};

use super::{LfDims, LightField4D};
use crate::error::{LfError, Result};

/// Reverses `x` and `u`.
pub fn flip_h_lf(lf: &LightField4D) -> LightField4D {
    let d = lf.dims();
    LightField4D::from_fn(d, |c, u, v, y, x| lf.get(c, d.u - 1 - u, v, y, d.x - 1 - x))
        .expect("same dims")
}

/// Reverses `y` and `v`.
pub fn flip_v_lf(lf: &LightField4D) -> LightField4D {
    let d = lf.dims();
    LightField4D::from_fn(d, |c, u, v, y, x| lf.get(c, u, d.v - 1 - v, d.y - 1 - y, x))
        .expect("same dims")
}

/// Counter-clockwise quarter turn of every view with the coupled angular
/// rotation: `(u', v', y', x') = (v, A-1-u, X-1-x, y)`.
///
/// Requires a square angular grid.
pub fn rot90_lf(lf: &LightField4D) -> Result<LightField4D> {
    let d = lf.dims();
    if d.u != d.v {
        return Err(LfError::shape(format!(
            "rot90 needs a square angular grid, got {}x{}",
            d.u, d.v
        )));
    }
    let a = d.u;
    let od = LfDims::new(d.c, a, a, d.x, d.y);
    LightField4D::from_fn(od, |c, u2, v2, y2, x2| {
        lf.get(c, a - 1 - v2, u2, x2, d.x - 1 - y2)
    })
}

/// Augmentation choices used by the training pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometricOp {
    None,
    FlipH,
    FlipV,
    Rot90,
}

impl GeometricOp {
    pub const ALL: [GeometricOp; 4] = [
        GeometricOp::None,
        GeometricOp::FlipH,
        GeometricOp::FlipV,
        GeometricOp::Rot90,
    ];

    pub fn apply(self, lf: &LightField4D) -> Result<LightField4D> {
        match self {
            GeometricOp::None => Ok(lf.clone()),
            GeometricOp::FlipH => Ok(flip_h_lf(lf)),
            GeometricOp::FlipV => Ok(flip_v_lf(lf)),
            GeometricOp::Rot90 => rot90_lf(lf),
        }
    }
}
