//! Every pair of pixels that sees the same scene point must be admitted by
//! the X-mask whenever the scene's disparity is within `d_max`.

use proptest::prelude::*;

use lfx_core::model::admits;
use lfx_core::optics::{depth_for_disparity, render_lf, OpticsConfig, SceneSpec, TextureParams};

fn optics(a: usize, width: usize) -> OpticsConfig {
    OpticsConfig {
        z0: 10.0,
        baseline: 4.0,
        pixel_pitch: 1.0,
        angular: [a, 1],
        spatial: [1, width],
    }
}

/// Offsets `(Δu, Δx)` of pixel pairs that trace the same point on the plane
/// at depth `z`, found by back-projection; the renderer must agree.
fn corresponding_offsets(o: &OpticsConfig, z: f64) -> Vec<(isize, isize)> {
    let lf = render_lf(&SceneSpec::single_plane(z, o, 2.0, &TextureParams::default(), 3), o).unwrap();
    let (na, nx) = (o.angular[0], o.spatial[1]);
    let mut out = Vec::new();
    for u1 in 0..na {
        for x1 in 0..nx {
            let wx = o.world_x(z, u1, x1);
            for u2 in 0..na {
                let xf = o.project_x(z, u2, wx);
                if (xf - xf.round()).abs() > 1e-9 || xf.round() < 0.0 || xf.round() >= nx as f64 {
                    continue;
                }
                let x2 = xf.round() as usize;
                assert!((lf.get(0, u1, 0, 0, x1) - lf.get(0, u2, 0, 0, x2)).abs() < 1e-9);
                out.push((u2 as isize - u1 as isize, x2 as isize - x1 as isize));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mask_admits_all_true_correspondences(d in -3i32..=3, a in 2usize..6, slack in 0.0f64..4.0) {
        let o = optics(a, 20);
        let pairs = corresponding_offsets(&o, depth_for_disparity(d as f64, &o));
        prop_assert!(pairs.iter().any(|p| p.0 != 0));
        let d_abs = d.unsigned_abs() as f64;
        let above = d_abs + slack;
        prop_assert!(pairs.iter().all(|&(da, dp)| admits(da, dp, above.max(0.5))));
        if d != 0 {
            let below = d_abs * (1.0 - slack / 8.0) - 1e-9;
            if below > 0.0 {
                prop_assert!(pairs.iter().any(|&(da, dp)| !admits(da, dp, below)));
            }
        }
    }
}
