//! Fan-out helpers for independent jobs (repetitions, Monte-Carlo draws,
//! sweep cells). With the `parallel` feature (default) [`map_indexed`]
//! dispatches over a rayon pool; without it, both entry points run
//! serially. Results come back in index order either way, so callers see
//! identical output regardless of scheduling.

/// Runs `job(0..n)` and collects the results in index order, in parallel
/// when the `parallel` feature is enabled.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(job).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed_serial(n, job)
}

/// Always-serial variant, kept callable so benchmarks can compare the two
/// paths within one build.
pub fn map_indexed_serial<T, F>(n: usize, job: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(job).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let par = map_indexed(64, |i| i * i);
        let ser = map_indexed_serial(64, |i| i * i);
        assert_eq!(par, ser);
    }
}
