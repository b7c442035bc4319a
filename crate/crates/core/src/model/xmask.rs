//! X-shaped attention mask over EPI token sequences.
//!
//! Tokens of one sequence are indexed `a·L + p` (angular index `a` of `S`,
//! spatial index `p` of `L`). A query/key pair is admitted when the line
//! through both points has `|Δp / Δa| ≤ d_max`, i.e. when it could be the
//! trace of a single scene point with bounded disparity. Pairs with `Δp = 0`
//! have slope 0; pairs with `Δa = 0, Δp ≠ 0` have infinite slope and are only
//! admitted when `d_max = ∞`.

use crate::autodiff::{Real, Tensor};
use crate::error::{LfError, Result};

/// Whether a query/key offset is admitted.
pub fn admits(da: isize, dp: isize, d_max: f64) -> bool {
    if dp == 0 {
        return true;
    }
    if da == 0 {
        return d_max == f64::INFINITY;
    }
    (dp.unsigned_abs() as f64) <= d_max * da.unsigned_abs() as f64
}

/// `[S·L, S·L]` additive mask holding `0` (admitted) or `−∞`.
pub fn build_xmask<T: Real>(s: usize, l: usize, d_max: f64) -> Result<Tensor<T>> {
    if s == 0 || l == 0 {
        return Err(LfError::invalid(format!("x-mask needs S, L ≥ 1 (got {s}, {l})")));
    }
    if !(d_max > 0.0) {
        return Err(LfError::invalid(format!("d_max must be positive, got {d_max}")));
    }
    let n = s * l;
    Ok(Tensor::from_fn(&[n, n], |i| {
        let (q, k) = (i / n, i % n);
        let da = (k / l) as isize - (q / l) as isize;
        let dp = (k % l) as isize - (q % l) as isize;
        if admits(da, dp, d_max) {
            T::zero()
        } else {
            T::neg_infinity()
        }
    }))
}

/// Number of admitted entries of a mask.
pub fn admitted_count<T: Real>(mask: &Tensor<T>) -> usize {
    mask.data().iter().filter(|v| v.is_finite()).count()
}
