//! Cell-loop helpers shared by every kernel.
//!
//! With the `parallel` feature the loops are split over rayon's pool; otherwise (or after
//! [`set_parallel`]`(false)`) they run on the calling thread. Reductions are always formed as
//! in-order sums of fixed-size chunk partials, so both paths return bit-identical results.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Cells per work item and per reduction partial.
pub const CHUNK: usize = 1024;

static ENABLED: AtomicBool = AtomicBool::new(true);

/// Runtime switch between the rayon and sequential paths. No effect without the `parallel` feature.
pub fn set_parallel(enabled: bool) {
    ENABLED.store(enabled, Ordering::Relaxed);
}

pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && ENABLED.load(Ordering::Relaxed)
}

/// `out[i] = f(i)` for every index.
pub fn fill<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * CHUNK;
            for (j, o) in chunk.iter_mut().enumerate() {
                *o = f(base + j);
            }
        });
        return;
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i);
    }
}

/// `out[i] = f(i, out[i])` for every index.
pub fn update<F>(out: &mut [f64], f: F)
where
    F: Fn(usize, f64) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * CHUNK;
            for (j, o) in chunk.iter_mut().enumerate() {
                *o = f(base + j, *o);
            }
        });
        return;
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i, *o);
    }
}

fn chunk_sum<F: Fn(usize) -> f64>(c: usize, n: usize, f: &F) -> f64 {
    let end = ((c + 1) * CHUNK).min(n);
    let mut s = 0.0;
    for i in c * CHUNK..end {
        s += f(i);
    }
    s
}

/// `Σ_{i<n} f(i)` with a deterministic summation order.
pub fn sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    #[cfg(feature = "parallel")]
    if parallel_enabled() && chunks > 1 {
        let partials: Vec<f64> = (0..chunks)
            .into_par_iter()
            .map(|c| chunk_sum(c, n, &f))
            .collect();
        return partials.iter().sum();
    }
    let mut total = 0.0;
    for c in 0..chunks {
        total += chunk_sum(c, n, &f);
    }
    total
}

/// `max_{i<n} f(i)`, `-inf` for an empty range.
pub fn max<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() && n > CHUNK {
        return (0..n)
            .into_par_iter()
            .with_min_len(CHUNK)
            .map(&f)
            .reduce(|| f64::NEG_INFINITY, f64::max);
    }
    (0..n).map(f).fold(f64::NEG_INFINITY, f64::max)
}

/// `min_{i<n} f(i)`, `+inf` for an empty range.
pub fn min<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    -max(n, |i| -f(i))
}
