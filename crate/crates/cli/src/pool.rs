//! Bounded worker pool with order-preserving results.

use rayon::prelude::*;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "SEPNN_WORKERS";

/// Worker count from `SEPNN_WORKERS`, else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Applies `f` to every item on `workers` threads; output order matches input order.
pub fn map_ordered<T, R, F>(workers: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect())
}
