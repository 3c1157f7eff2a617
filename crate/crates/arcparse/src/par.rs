//! Thin fan-out layer over rayon with a sequential fallback.
//!
//! All entry points keep input order in their output, so results are
//! identical regardless of thread count or whether the `parallel` feature
//! is compiled in. `threads <= 1` always takes the sequential path.

/// Number of workers to use by default.
pub fn default_threads() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| items.par_iter().map(f).collect())
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], _threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_reduce<T, R, F, I, Op>(items: &[T], threads: usize, f: F, identity: I, op: Op) -> R
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
    I: Fn() -> R + Sync + Send,
    Op: Fn(R, R) -> R + Sync + Send,
{
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(f).fold(identity(), &op);
    }
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| items.par_iter().map(f).reduce(&identity, &op))
}

#[cfg(not(feature = "parallel"))]
pub fn map_reduce<T, R, F, I, Op>(items: &[T], _threads: usize, f: F, identity: I, op: Op) -> R
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
    I: Fn() -> R + Sync + Send,
    Op: Fn(R, R) -> R + Sync + Send,
{
    items.iter().map(f).fold(identity(), &op)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_keeps_order_across_thread_counts() {
        let items: Vec<u64> = (0..257).collect();
        let seq = map(&items, 1, |x| x * 3);
        let par = map(&items, 8, |x| x * 3);
        assert_eq!(seq, par);
    }

    #[test]
    fn map_reduce_matches_sequential_fold() {
        let items: Vec<u64> = (1..=100).collect();
        let seq = map_reduce(&items, 1, |x| *x, || 0u64, |a, b| a + b);
        let par = map_reduce(&items, 4, |x| *x, || 0u64, |a, b| a + b);
        assert_eq!(seq, 5050);
        assert_eq!(par, 5050);
    }
}
