//! Data-parallel map with a deterministic sequential fallback.
//!
//! `EQVI_THREADS` selects the worker count: unset or `0` runs sequentially
//! (the reproducible default), `n > 0` uses a rayon pool of `n` threads
//! when the `parallel` feature is enabled. Results keep input order either
//! way, so outputs do not depend on the thread count.

/// Worker count requested through `EQVI_THREADS`.
pub fn threads_from_env() -> usize {
    std::env::var("EQVI_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

/// Order-preserving map using the `EQVI_THREADS` setting.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_with(threads_from_env(), items, f)
}

/// Order-preserving map on `threads` workers (`0` = sequential).
pub fn map_with<T, R, F>(threads: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if threads > 0 && items.len() > 1 {
        use rayon::prelude::*;
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            return pool.install(|| items.par_iter().map(&f).collect());
        }
    }
    let _ = threads;
    items.iter().map(f).collect()
}
