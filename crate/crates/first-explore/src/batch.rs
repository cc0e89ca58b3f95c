//! Batch execution helpers.
//!
//! Everything batched in this crate (meta-rollouts, evaluation sweeps, Monte
//! Carlo checks) is expressed as a pure function of an item index, with
//! randomness coming from per-index streams. That makes the parallel and
//! sequential paths bit-identical: work order cannot influence results.
//!
//! With the default `parallel` feature the indexed helpers run on rayon;
//! without it they fall back to plain loops. The `*_seq` variants are always
//! available so benchmarks can compare both paths in one build.
//!
//! `FE_THREADS` caps the rayon worker count. It is read once, on first use.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
fn init_pool() {
    use std::sync::Once;
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        if let Some(n) = std::env::var("FE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
            // Ignore failure: the global pool may already exist (tests, benches).
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    });
}

/// `(0..n).map(f)` collected in index order, sequentially.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync,
    T: Send,
{
    (0..n).map(f).collect()
}

/// `(0..n).map(f)` collected in index order, in parallel when enabled.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
    T: Send,
{
    init_pool();
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
    T: Send,
{
    map_indexed_seq(n, f)
}

/// Number of fixed chunks used by [`fold_indexed`]. Constant so that the
/// reduction tree, and therefore floating-point rounding, is independent of
/// thread count.
const FOLD_CHUNKS: usize = 16;

/// Folds `f(0) .. f(n-1)` into accumulators and merges them in a fixed order.
///
/// Items are split into [`FOLD_CHUNKS`] contiguous ranges; each range folds
/// sequentially in index order, ranges may run in parallel, and the partial
/// accumulators merge left to right. The result is bitwise independent of
/// thread count and scheduling.
pub fn fold_indexed<A, F, M>(n: usize, init: impl Fn() -> A + Sync + Send, fold: F, merge: M) -> A
where
    A: Send,
    F: Fn(&mut A, usize) + Sync + Send,
    M: Fn(&mut A, A),
{
    let chunk = n.div_ceil(FOLD_CHUNKS).max(1);
    let ranges: Vec<(usize, usize)> =
        (0..n).step_by(chunk).map(|s| (s, (s + chunk).min(n))).collect();
    let fold_range = |&(s, e): &(usize, usize)| {
        let mut acc = init();
        for i in s..e {
            fold(&mut acc, i);
        }
        acc
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<A> = {
        init_pool();
        ranges.par_iter().map(fold_range).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<A> = ranges.iter().map(fold_range).collect();

    let mut out = init();
    for p in parts {
        merge(&mut out, p);
    }
    out
}

/// Sequential twin of [`fold_indexed`], for benchmarks.
pub fn fold_indexed_seq<A, F, M>(n: usize, init: impl Fn() -> A, fold: F, merge: M) -> A
where
    F: Fn(&mut A, usize),
    M: Fn(&mut A, A),
{
    let chunk = n.div_ceil(FOLD_CHUNKS).max(1);
    let mut out = init();
    let mut s = 0;
    while s < n {
        let e = (s + chunk).min(n);
        let mut acc = init();
        for i in s..e {
            fold(&mut acc, i);
        }
        merge(&mut out, acc);
        s = e;
    }
    out
}

/// Mean and (population) standard deviation of `f` over `n` indexed items.
pub fn mean_std_indexed<F>(n: usize, f: F) -> (f64, f64)
where
    F: Fn(usize) -> f64 + Sync,
{
    assert!(n > 0, "mean over empty batch");
    let (sum, sumsq) = fold_indexed(
        n,
        || (0.0f64, 0.0f64),
        |acc, i| {
            let x = f(i);
            acc.0 += x;
            acc.1 += x * x;
        },
        |a, b| {
            a.0 += b.0;
            a.1 += b.1;
        },
    );
    let mean = sum / n as f64;
    let var = (sumsq / n as f64 - mean * mean).max(0.0);
    (mean, var.sqrt())
}
