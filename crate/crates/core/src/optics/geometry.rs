use super::OpticsConfig;

/// Lateral scaling `s(z) = 1 + z/z0` of a layer at depth `z`.
#[inline]
pub fn scale_factor(z: f64, z0: f64) -> f64 {
    1.0 + z / z0
}

/// Slope `du/dx = (z + z0)/z` of the line a point at depth `z` traces in an
/// epipolar plane, in units where baseline and pixel pitch coincide.
///
/// At `z = 0` the line is vertical and the IEEE quotient gives a signed
/// infinity (`+inf` for `+0.0`, `-inf` for `-0.0`).
pub fn epi_line_slope(z: f64, z0: f64) -> f64 {
    (z + z0) / z
}

/// Pixel shift per angular step, `b·z / (p·(z + z0))`; zero at the focal plane.
pub fn disparity_pixels(z: f64, optics: &OpticsConfig) -> f64 {
    optics.baseline * z / (optics.pixel_pitch * (z + optics.z0))
}

/// Depth at which an ordinary view samples the scene at the same rate as a
/// virtual-slit image of an object at `z_vsi`: `−z_vsi − z0`.
pub fn vsi_equivalent_depth(z_vsi: f64, z0: f64) -> f64 {
    -z_vsi - z0
}

/// Depth whose disparity is `d` pixels per angular step (inverse of
/// [`disparity_pixels`]); `d` must be below `b/p`.
pub fn depth_for_disparity(d: f64, optics: &OpticsConfig) -> f64 {
    let dp = d * optics.pixel_pitch;
    dp * optics.z0 / (optics.baseline - dp)
}
