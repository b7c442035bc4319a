use serde::{Deserialize, Serialize};

use super::{LfDims, LightField4D};
use crate::error::{LfError, Result};
use crate::layout;

/// One of the four light-field coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    U,
    V,
    Y,
    X,
}

impl Axis {
    /// Position of the axis in the canonical `[c, u, v, y, x]` layout.
    pub const fn position(self) -> usize {
        match self {
            Axis::U => 1,
            Axis::V => 2,
            Axis::Y => 3,
            Axis::X => 4,
        }
    }

    pub const fn extent(self, d: &LfDims) -> usize {
        match self {
            Axis::U => d.u,
            Axis::V => d.v,
            Axis::Y => d.y,
            Axis::X => d.x,
        }
    }

    pub const fn is_angular(self) -> bool {
        matches!(self, Axis::U | Axis::V)
    }
}

/// The six 2D coordinate-pair slices of a 4D light field.
///
/// Each member names its plane axes `(rows, cols)`; the two remaining axes
/// form the batch, outer first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubspaceId {
    /// Sub-aperture images: plane `y–x`, batch `u–v`.
    Sai,
    /// Macro-pixel images: plane `u–v`, batch `y–x`.
    MacPi,
    /// Epipolar plane `u–x`, batch `v–y`.
    EpiUx,
    /// Epipolar plane `v–y`, batch `u–x`.
    EpiVy,
    /// Virtual-slit plane `v–x`, batch `u–y`.
    VsiVx,
    /// Virtual-slit plane `u–y`, batch `v–x`.
    VsiUy,
}

impl SubspaceId {
    pub const ALL: [SubspaceId; 6] = [
        SubspaceId::Sai,
        SubspaceId::MacPi,
        SubspaceId::EpiUx,
        SubspaceId::EpiVy,
        SubspaceId::VsiVx,
        SubspaceId::VsiUy,
    ];

    pub const fn plane_axes(self) -> (Axis, Axis) {
        match self {
            SubspaceId::Sai => (Axis::Y, Axis::X),
            SubspaceId::MacPi => (Axis::U, Axis::V),
            SubspaceId::EpiUx => (Axis::U, Axis::X),
            SubspaceId::EpiVy => (Axis::V, Axis::Y),
            SubspaceId::VsiVx => (Axis::V, Axis::X),
            SubspaceId::VsiUy => (Axis::U, Axis::Y),
        }
    }

    pub const fn batch_axes(self) -> (Axis, Axis) {
        match self {
            SubspaceId::Sai => (Axis::U, Axis::V),
            SubspaceId::MacPi => (Axis::Y, Axis::X),
            SubspaceId::EpiUx => (Axis::V, Axis::Y),
            SubspaceId::EpiVy => (Axis::U, Axis::X),
            SubspaceId::VsiVx => (Axis::U, Axis::Y),
            SubspaceId::VsiUy => (Axis::V, Axis::X),
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            SubspaceId::Sai => "sai",
            SubspaceId::MacPi => "macpi",
            SubspaceId::EpiUx => "epi-ux",
            SubspaceId::EpiVy => "epi-vy",
            SubspaceId::VsiVx => "vsi-vx",
            SubspaceId::VsiUy => "vsi-uy",
        }
    }

    pub fn is_vsi(self) -> bool {
        matches!(self, SubspaceId::VsiVx | SubspaceId::VsiUy)
    }

    /// Permutation of `[c, u, v, y, x]` into `[c, batch0, batch1, row, col]`.
    pub fn permutation(self) -> [usize; 5] {
        let (b0, b1) = self.batch_axes();
        let (r, c) = self.plane_axes();
        [0, b0.position(), b1.position(), r.position(), c.position()]
    }
}

impl std::fmt::Display for SubspaceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A stack of 2D planes, stored as `[c, batch, rows, cols]`.
///
/// `batch` flattens the subspace's two batch axes, outer index first.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneBatch {
    pub channels: usize,
    pub batch: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl PlaneBatch {
    #[inline]
    pub fn get(&self, c: usize, b: usize, r: usize, col: usize) -> f64 {
        self.data[((c * self.batch + b) * self.rows + r) * self.cols + col]
    }

    /// Plane `b` of channel `c` as a 2D image.
    pub fn plane(&self, c: usize, b: usize) -> crate::plane::Plane {
        let n = self.rows * self.cols;
        let s = (c * self.batch + b) * n;
        crate::plane::Plane::new(self.rows, self.cols, self.data[s..s + n].to_vec())
            .expect("plane slice")
    }
}

/// Rearranges `lf` into the planes of subspace `id`.
///
/// Element `[c, b0 * n1 + b1, r, k]` of the result is the light-field sample
/// whose batch axes take values `(b0, b1)` and plane axes `(r, k)`.
pub fn subspace_view(lf: &LightField4D, id: SubspaceId) -> PlaneBatch {
    let d = lf.dims();
    let shape = d.as_array();
    let perm = id.permutation();
    let data = layout::permute_copy(lf.data(), &shape, &perm);
    let (b0, b1) = id.batch_axes();
    let (r, c) = id.plane_axes();
    PlaneBatch {
        channels: d.c,
        batch: b0.extent(&d) * b1.extent(&d),
        rows: r.extent(&d),
        cols: c.extent(&d),
        data,
    }
}

/// Inverse of [`subspace_view`].
pub fn subspace_unview(pb: &PlaneBatch, id: SubspaceId, dims: LfDims) -> Result<LightField4D> {
    dims.validate()?;
    let (b0, b1) = id.batch_axes();
    let (r, c) = id.plane_axes();
    let expect = (
        dims.c,
        b0.extent(&dims) * b1.extent(&dims),
        r.extent(&dims),
        c.extent(&dims),
    );
    if (pb.channels, pb.batch, pb.rows, pb.cols) != expect || pb.data.len() != dims.numel() {
        return Err(LfError::shape(format!(
            "plane batch {}x{}x{}x{} does not match {id} of {dims}",
            pb.channels, pb.batch, pb.rows, pb.cols
        )));
    }
    let perm = id.permutation();
    let viewed_shape = layout::permuted_shape(&dims.as_array(), &perm);
    let data = layout::permute_copy(&pb.data, &viewed_shape, &layout::inverse_perm(&perm));
    LightField4D::new(dims, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(d: LfDims) -> LightField4D {
        LightField4D::new(d, (0..d.numel()).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn plane_and_batch_axes_partition_coordinates() {
        for id in SubspaceId::ALL {
            let (a, b) = id.plane_axes();
            let (c, d) = id.batch_axes();
            let mut pos = [a.position(), b.position(), c.position(), d.position()];
            pos.sort();
            assert_eq!(pos, [1, 2, 3, 4], "{id}");
        }
    }

    #[test]
    fn sai_view_of_ramp() {
        let lf = ramp(LfDims::new(1, 2, 2, 2, 2));
        let pb = subspace_view(&lf, SubspaceId::Sai);
        assert_eq!((pb.batch, pb.rows, pb.cols), (4, 2, 2));
        for b in 0..4 {
            let want: Vec<f64> = (0..4).map(|k| (b * 4 + k) as f64).collect();
            assert_eq!(pb.plane(0, b).data(), &want[..]);
        }
    }

    #[test]
    fn macpi_view_gathers_angles_of_one_pixel() {
        let lf = ramp(LfDims::new(1, 2, 2, 2, 2));
        let pb = subspace_view(&lf, SubspaceId::MacPi);
        // batch (y, x) = (0, 1): values at u,v = 00,01,10,11 are 1, 5, 9, 13
        assert_eq!(pb.plane(0, 1).data(), &[1.0, 5.0, 9.0, 13.0]);
        assert_eq!(pb.plane(0, 2).data(), &[2.0, 6.0, 10.0, 14.0]);
    }

    #[test]
    fn view_elements_follow_documented_bijection() {
        let d = LfDims::new(2, 3, 4, 5, 6);
        let lf = LightField4D::from_fn(d, |c, u, v, y, x| {
            (c * 10000 + u * 1000 + v * 100 + y * 10 + x) as f64
        })
        .unwrap();
        for id in SubspaceId::ALL {
            let pb = subspace_view(&lf, id);
            let (b0, b1) = id.batch_axes();
            let (ra, ca) = id.plane_axes();
            let n1 = b1.extent(&d);
            for c in 0..d.c {
                for i0 in 0..b0.extent(&d) {
                    for i1 in 0..n1 {
                        for r in 0..ra.extent(&d) {
                            for k in 0..ca.extent(&d) {
                                let mut idx = [c, 0, 0, 0, 0];
                                idx[b0.position()] = i0;
                                idx[b1.position()] = i1;
                                idx[ra.position()] = r;
                                idx[ca.position()] = k;
                                let want = lf.get(idx[0], idx[1], idx[2], idx[3], idx[4]);
                                assert_eq!(pb.get(c, i0 * n1 + i1, r, k), want, "{id}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn unview_rejects_mismatched_dims() {
        let lf = ramp(LfDims::new(1, 2, 3, 4, 5));
        let pb = subspace_view(&lf, SubspaceId::EpiUx);
        assert!(subspace_unview(&pb, SubspaceId::EpiUx, LfDims::new(1, 3, 2, 4, 5)).is_err());
        assert!(subspace_unview(&pb, SubspaceId::Sai, LfDims::new(1, 2, 3, 4, 6)).is_err());
    }

    #[test]
    fn unview_of_zeros_is_zero() {
        let d = LfDims::new(2, 3, 3, 4, 4);
        for id in SubspaceId::ALL {
            let pb = subspace_view(&LightField4D::zeros(d).unwrap(), id);
            let back = subspace_unview(&pb, id, d).unwrap();
            assert!(back.data().iter().all(|&v| v == 0.0));
        }
    }

    fn arb_lf() -> impl Strategy<Value = LightField4D> {
        (1usize..=8, 1usize..=5, 1usize..=5, 1usize..=16, 1usize..=16).prop_flat_map(
            |(c, u, v, y, x)| {
                let d = LfDims::new(c, u, v, y, x);
                proptest::collection::vec(-1.0e3f64..1.0e3, d.numel())
                    .prop_map(move |data| LightField4D::new(d, data).unwrap())
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn view_unview_is_identity(lf in arb_lf()) {
            for id in SubspaceId::ALL {
                let pb = subspace_view(&lf, id);
                let back = subspace_unview(&pb, id, lf.dims()).unwrap();
                prop_assert_eq!(&back, &lf);
            }
        }

        #[test]
        fn view_preserves_value_multiset(lf in arb_lf()) {
            let mut want = lf.data().to_vec();
            want.sort_by(f64::total_cmp);
            for id in SubspaceId::ALL {
                let mut got = subspace_view(&lf, id).data;
                got.sort_by(f64::total_cmp);
                prop_assert_eq!(&got, &want);
            }
        }
    }
}
