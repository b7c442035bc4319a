//! Row-major index helpers shared by the light-field container and the
//! autodiff tensors.

use crate::error::{LfError, Result};

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

pub fn check_perm(perm: &[usize], rank: usize) -> Result<()> {
    if perm.len() != rank {
        return Err(LfError::shape(format!(
            "permutation {perm:?} has wrong rank for {rank}-d input"
        )));
    }
    let mut seen = vec![false; rank];
    for &p in perm {
        if p >= rank || seen[p] {
            return Err(LfError::shape(format!("{perm:?} is not a permutation")));
        }
        seen[p] = true;
    }
    Ok(())
}

pub fn inverse_perm(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

pub fn permuted_shape(shape: &[usize], perm: &[usize]) -> Vec<usize> {
    perm.iter().map(|&p| shape[p]).collect()
}

/// Copies `src` (row-major, `shape`) into a new buffer whose axis `i` is the
/// source axis `perm[i]`.
///
/// Output element at multi-index `o` equals source element at `s` with
/// `s[perm[i]] = o[i]`. The innermost output axis is walked with a fixed
/// source stride so the loop stays branch-free.
pub fn permute_copy<T: Copy>(src: &[T], shape: &[usize], perm: &[usize]) -> Vec<T> {
    debug_assert_eq!(src.len(), numel(shape));
    let rank = shape.len();
    if rank == 0 || src.is_empty() {
        return src.to_vec();
    }
    if perm.iter().enumerate().all(|(i, &p)| i == p) {
        return src.to_vec();
    }
    let out_shape = permuted_shape(shape, perm);
    let src_strides = strides(shape);
    let gather: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();

    let inner = out_shape[rank - 1];
    let inner_stride = gather[rank - 1];
    let outer_shape = &out_shape[..rank - 1];
    let outer_count = numel(outer_shape);

    let mut out = Vec::with_capacity(src.len());
    let mut idx = vec![0usize; rank - 1];
    let mut base = 0usize;
    for _ in 0..outer_count {
        let mut off = base;
        for _ in 0..inner {
            out.push(src[off]);
            off += inner_stride;
        }
        // odometer increment over the outer axes
        let mut ax = rank - 1;
        while ax > 0 {
            ax -= 1;
            idx[ax] += 1;
            base += gather[ax];
            if idx[ax] < outer_shape[ax] {
                break;
            }
            base -= gather[ax] * outer_shape[ax];
            idx[ax] = 0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(src: &[i64], shape: &[usize], perm: &[usize]) -> Vec<i64> {
        let out_shape = permuted_shape(shape, perm);
        let ss = strides(shape);
        let n = numel(shape);
        let os = strides(&out_shape);
        let mut out = vec![0; n];
        for (o, slot) in out.iter_mut().enumerate() {
            let mut rem = o;
            let mut s = 0;
            for ax in 0..shape.len() {
                let i = rem / os[ax];
                rem %= os[ax];
                s += i * ss[perm[ax]];
            }
            *slot = src[s];
        }
        out
    }

    #[test]
    fn permute_matches_naive_gather() {
        let shape = [2, 3, 4, 5];
        let src: Vec<i64> = (0..120).collect();
        for perm in [[0, 1, 2, 3], [3, 2, 1, 0], [1, 3, 0, 2], [2, 0, 3, 1]] {
            assert_eq!(permute_copy(&src, &shape, &perm), naive(&src, &shape, &perm));
        }
    }

    #[test]
    fn inverse_perm_undoes() {
        let shape = [3, 1, 4, 2];
        let perm = [2, 0, 3, 1];
        let src: Vec<i64> = (0..24).collect();
        let p = permute_copy(&src, &shape, &perm);
        let back = permute_copy(&p, &permuted_shape(&shape, &perm), &inverse_perm(&perm));
        assert_eq!(back, src);
    }

    #[test]
    fn rejects_bad_permutation() {
        assert!(check_perm(&[0, 0, 1], 3).is_err());
        assert!(check_perm(&[0, 1], 3).is_err());
        assert!(check_perm(&[2, 0, 1], 3).is_ok());
    }
}
