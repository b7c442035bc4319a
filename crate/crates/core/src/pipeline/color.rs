use crate::error::{LfError, Result};
use crate::lightfield::{LfDims, LightField4D};

/// BT.601 luma of an RGB triple in `[0, 1]`, on the studio-swing scale:
/// `(65.481·R + 128.553·G + 24.966·B + 16) / 255`.
#[inline]
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    (65.481 * r + 128.553 * g + 24.966 * b + 16.0) / 255.0
}

/// Converts a 3-channel light field to its single-channel Y component.
pub fn rgb_to_y(lf: &LightField4D) -> Result<LightField4D> {
    let d = lf.dims();
    if d.c != 3 {
        return Err(LfError::shape(format!(
            "rgb_to_y needs 3 channels, got {}",
            d.c
        )));
    }
    let n = d.u * d.v * d.y * d.x;
    let src = lf.data();
    let data = (0..n)
        .map(|i| luma(src[i], src[n + i], src[2 * n + i]))
        .collect();
    LightField4D::new(LfDims { c: 1, ..d }, data)
}

/// Returns the Y channel: converts RGB input, passes single-channel input
/// through unchanged.
pub fn to_luma(lf: &LightField4D) -> Result<LightField4D> {
    match lf.dims().c {
        1 => Ok(lf.clone()),
        3 => rgb_to_y(lf),
        c => Err(LfError::shape(format!(
            "expected 1 or 3 channels, got {c}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solid(r: f64, g: f64, b: f64) -> LightField4D {
        let d = LfDims::new(3, 1, 1, 1, 1);
        LightField4D::new(d, vec![r, g, b]).unwrap()
    }

    #[test]
    fn bt601_endpoints() {
        let white = rgb_to_y(&solid(1.0, 1.0, 1.0)).unwrap();
        assert!((white.data()[0] - 235.0 / 255.0).abs() < 1e-12);
        let black = rgb_to_y(&solid(0.0, 0.0, 0.0)).unwrap();
        assert!((black.data()[0] - 16.0 / 255.0).abs() < 1e-15);
        let gray = rgb_to_y(&solid(0.5, 0.5, 0.5)).unwrap();
        assert!((gray.data()[0] - (0.5 * 219.0 + 16.0) / 255.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_channel_count() {
        let lf = LightField4D::zeros(LfDims::new(2, 1, 1, 2, 2)).unwrap();
        assert!(rgb_to_y(&lf).is_err());
        assert!(to_luma(&lf).is_err());
    }
}
