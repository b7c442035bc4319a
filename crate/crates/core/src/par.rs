//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) these dispatch onto the rayon global
//! pool; without it they run the same closures sequentially. Every helper
//! keeps output order fixed, and reductions are done over fixed-size chunks
//! and then summed in index order, so results are bit-identical regardless of
//! the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of items folded together before a cross-chunk reduction.
pub const REDUCE_CHUNK: usize = 8;

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Calls `f(i, chunk)` for every `chunk_len`-sized piece of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if chunk_len == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
}

/// Same as [`for_each_chunk_mut`] over two equally chunked buffers.
pub fn for_each_chunk_pair_mut<A, B, F>(a: &mut [A], a_len: usize, b: &mut [B], b_len: usize, f: F)
where
    A: Send,
    B: Send,
    F: Fn(usize, &mut [A], &mut [B]) + Sync + Send,
{
    if a_len == 0 || b_len == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        a.par_chunks_mut(a_len)
            .zip(b.par_chunks_mut(b_len))
            .enumerate()
            .for_each(|(i, (x, y))| f(i, x, y));
    }
    #[cfg(not(feature = "parallel"))]
    {
        a.chunks_mut(a_len)
            .zip(b.chunks_mut(b_len))
            .enumerate()
            .for_each(|(i, (x, y))| f(i, x, y));
    }
}

/// Sums per-item vectors of length `len` over `0..n` deterministically.
///
/// Items are grouped into runs of [`REDUCE_CHUNK`]; each run is accumulated by
/// `fold(acc, i)` in index order, then the run totals are summed in order.
pub fn chunked_sum<T, F>(n: usize, len: usize, fold: F) -> Vec<T>
where
    T: Copy + Default + Send + Sync + std::ops::AddAssign,
    F: Fn(&mut [T], usize) + Sync + Send,
{
    let runs = n.div_ceil(REDUCE_CHUNK);
    let partials = map_range(runs, |r| {
        let mut acc = vec![T::default(); len];
        let end = ((r + 1) * REDUCE_CHUNK).min(n);
        for i in r * REDUCE_CHUNK..end {
            fold(&mut acc, i);
        }
        acc
    });
    let mut total = vec![T::default(); len];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Number of worker threads the current pool will use.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Keeps freed heap blocks in the process instead of handing them back to
/// the OS. Autodiff graphs allocate and drop many multi-megabyte buffers per
/// step; with glibc's defaults each of those is a fresh `mmap`, and the page
/// faults on first touch can cost more than the arithmetic. No-op on other
/// platforms. Call once, early, from a binary.
pub fn retain_freed_memory() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    // SAFETY: mallopt only adjusts allocator tunables.
    unsafe {
        libc::mallopt(libc::M_MMAP_THRESHOLD, 1 << 30);
        libc::mallopt(libc::M_TRIM_THRESHOLD, i32::MAX);
    }
}
