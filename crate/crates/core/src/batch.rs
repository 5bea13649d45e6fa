//! Order-canonical replicate execution.

/// Evaluates `f(0), ..., f(count - 1)` and returns the results in index
/// order. `workers == 1` runs inline; `0` uses the default thread count.
/// Without the `parallel` feature everything runs inline.
pub fn map_replicates<T, F>(count: u64, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if workers != 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        return pool.install(|| (0..count).into_par_iter().map(&f).collect());
    }
    let _ = workers;
    (0..count).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_keep_index_order() {
        let a = map_replicates(100, 1, |i| i * i);
        let b = map_replicates(100, 4, |i| i * i);
        assert_eq!(a, b);
        assert_eq!(a[7], 49);
    }
}
