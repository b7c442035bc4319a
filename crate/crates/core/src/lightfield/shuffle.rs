//! Channel/angle/pixel rearrangements.

use super::{LfDims, LightField4D};
use crate::error::{check_divisible, LfError, Result};
use crate::plane::{Array3, Plane};

/// Packs channel `c` of `lf` into a macro-pixel image of size
/// `(Y·U) x (X·V)`; pixel `(y·U + u, x·V + v)` holds sample `(u, v, y, x)`.
pub fn to_macpi_image(lf: &LightField4D, c: usize) -> Result<Plane> {
    let d = lf.dims();
    if c >= d.c {
        return Err(LfError::shape(format!("channel {c} out of range for {d}")));
    }
    Ok(Plane::from_fn(d.y * d.u, d.x * d.v, |r, k| {
        lf.get(c, r % d.u, k % d.v, r / d.u, k / d.v)
    }))
}

/// Inverse of [`to_macpi_image`] for a single-channel light field with
/// angular size `(u, v)`.
pub fn from_macpi_image(img: &Plane, u: usize, v: usize) -> Result<LightField4D> {
    check_divisible("macro-pixel image rows", img.rows(), u)?;
    check_divisible("macro-pixel image cols", img.cols(), v)?;
    let d = LfDims::new(1, u, v, img.rows() / u, img.cols() / v);
    LightField4D::from_fn(d, |_, uu, vv, y, x| img.get(y * u + uu, x * v + vv))
}

/// Sub-pixel rearrangement `[c·r², h, w] -> [c, h·r, w·r]`: output pixel
/// `(y·r + i, x·r + j)` of channel `c` is input channel `c·r² + i·r + j`.
pub fn pixel_shuffle_spatial(a: &Array3, r: usize) -> Result<Array3> {
    if r == 0 {
        return Err(LfError::invalid("shuffle factor must be >= 1"));
    }
    check_divisible("shuffle channels", a.channels, r * r)?;
    let c = a.channels / (r * r);
    let (h, w) = (a.rows * r, a.cols * r);
    let mut data = Vec::with_capacity(a.data.len());
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                let src = ch * r * r + (y % r) * r + (x % r);
                data.push(a.get(src, y / r, x / r));
            }
        }
    }
    Array3::new(c, h, w, data)
}

/// Inverse of [`pixel_shuffle_spatial`].
pub fn pixel_unshuffle_spatial(a: &Array3, r: usize) -> Result<Array3> {
    if r == 0 {
        return Err(LfError::invalid("shuffle factor must be >= 1"));
    }
    check_divisible("unshuffle rows", a.rows, r)?;
    check_divisible("unshuffle cols", a.cols, r)?;
    let (h, w) = (a.rows / r, a.cols / r);
    let c = a.channels * r * r;
    let mut data = Vec::with_capacity(a.data.len());
    for ch in 0..c {
        let (base, i, j) = (ch / (r * r), (ch % (r * r)) / r, ch % r);
        for y in 0..h {
            for x in 0..w {
                data.push(a.get(base, y * r + i, x * r + j));
            }
        }
    }
    Array3::new(c, h, w, data)
}

/// Moves channel groups into angular positions.
///
/// Input has `C·ku·kv` channels and angular size `(U0, V0)`; output has `C`
/// channels and angular size `(U0·ku, V0·kv)`. Channel `c·ku·kv + du·kv + dv`
/// at angle `(u0, v0)` becomes channel `c` at angle `(u0·ku + du, v0·kv + dv)`.
pub fn channel_to_angle(lf: &LightField4D, ku: usize, kv: usize) -> Result<LightField4D> {
    if ku == 0 || kv == 0 {
        return Err(LfError::invalid("channel-to-angle factors must be >= 1"));
    }
    let d = lf.dims();
    check_divisible("channel-to-angle channels", d.c, ku * kv)?;
    let od = LfDims::new(d.c / (ku * kv), d.u * ku, d.v * kv, d.y, d.x);
    LightField4D::from_fn(od, |c, u, v, y, x| {
        let ch = c * ku * kv + (u % ku) * kv + (v % kv);
        lf.get(ch, u / ku, v / kv, y, x)
    })
}

/// Inverse of [`channel_to_angle`].
pub fn angle_to_channel(lf: &LightField4D, ku: usize, kv: usize) -> Result<LightField4D> {
    if ku == 0 || kv == 0 {
        return Err(LfError::invalid("angle-to-channel factors must be >= 1"));
    }
    let d = lf.dims();
    check_divisible("angle-to-channel U", d.u, ku)?;
    check_divisible("angle-to-channel V", d.v, kv)?;
    let od = LfDims::new(d.c * ku * kv, d.u / ku, d.v / kv, d.y, d.x);
    LightField4D::from_fn(od, |ch, u0, v0, y, x| {
        let (c, du, dv) = (ch / (ku * kv), (ch % (ku * kv)) / kv, ch % kv);
        lf.get(c, u0 * ku + du, v0 * kv + dv, y, x)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_lf(d: LfDims, seed: u64) -> LightField4D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LightField4D::new(d, (0..d.numel()).map(|_| rng.gen::<f64>()).collect()).unwrap()
    }

    #[test]
    fn macpi_of_single_pixel() {
        let lf = LightField4D::new(LfDims::new(1, 2, 2, 1, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let img = to_macpi_image(&lf, 0).unwrap();
        assert_eq!((img.rows(), img.cols()), (2, 2));
        assert_eq!(img.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn macpi_round_trip_and_unit_angle() {
        let lf = random_lf(LfDims::new(1, 3, 4, 5, 6), 1);
        let img = to_macpi_image(&lf, 0).unwrap();
        assert_eq!(img.get(2 * 3 + 1, 4 * 4 + 3), lf.get(0, 1, 3, 2, 4));
        assert_eq!(from_macpi_image(&img, 3, 4).unwrap(), lf);

        let one = random_lf(LfDims::new(1, 1, 1, 4, 5), 2);
        assert_eq!(to_macpi_image(&one, 0).unwrap(), one.view(0, 0, 0));
    }

    #[test]
    fn pixel_shuffle_block() {
        let a = Array3::new(4, 1, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = pixel_shuffle_spatial(&a, 2).unwrap();
        assert_eq!((s.channels, s.rows, s.cols), (1, 2, 2));
        assert_eq!(s.data, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(pixel_shuffle_spatial(&a, 1).unwrap(), a);
    }

    #[test]
    fn pixel_shuffle_round_trip_and_divisibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Array3::new(18, 3, 4, (0..216).map(|_| rng.gen()).collect()).unwrap();
        let s = pixel_shuffle_spatial(&a, 3).unwrap();
        assert_eq!((s.channels, s.rows, s.cols), (2, 9, 12));
        assert_eq!(pixel_unshuffle_spatial(&s, 3).unwrap(), a);
        assert!(matches!(
            pixel_shuffle_spatial(&a, 4),
            Err(LfError::Divisibility { .. })
        ));
    }

    #[test]
    fn channel_to_angle_identity_and_round_trip() {
        let lf = random_lf(LfDims::new(8, 1, 1, 3, 3), 4);
        assert_eq!(channel_to_angle(&lf, 1, 1).unwrap(), lf);
        let up = channel_to_angle(&lf, 2, 2).unwrap();
        assert_eq!(up.dims(), LfDims::new(2, 2, 2, 3, 3));
        assert_eq!(up.data().len(), lf.data().len());
        assert_eq!(angle_to_channel(&up, 2, 2).unwrap(), lf);
        // channel 1*4 + 1*2 + 0 lands at (c=1, u=1, v=0)
        assert_eq!(up.get(1, 1, 0, 2, 1), lf.get(6, 0, 0, 2, 1));
    }

    #[test]
    fn channel_to_angle_one_axis_and_errors() {
        let lf = random_lf(LfDims::new(6, 2, 2, 2, 2), 5);
        let up = channel_to_angle(&lf, 3, 1).unwrap();
        assert_eq!(up.dims(), LfDims::new(2, 6, 2, 2, 2));
        assert_eq!(angle_to_channel(&up, 3, 1).unwrap(), lf);
        assert!(channel_to_angle(&lf, 2, 2).is_err());
        let rt = channel_to_angle(&angle_to_channel(&up, 1, 2).unwrap(), 1, 2).unwrap();
        assert_eq!(rt, up);
    }
}
