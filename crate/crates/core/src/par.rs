//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) batch work fans out over rayon's
//! global pool; without it the same entry points run sequentially. Results
//! are always returned in input order, so output never depends on the
//! scheduling or on the number of worker threads.

/// Sequential implementations. Always available.
pub mod seq {
    pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
    where
        F: Fn(usize) -> R,
    {
        (0..n).map(f).collect()
    }

    pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
    where
        F: Fn(usize, &T) -> R,
    {
        items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }

    pub fn try_map_range<R, E, F>(n: usize, f: F) -> Result<Vec<R>, E>
    where
        F: Fn(usize) -> Result<R, E>,
    {
        (0..n).map(f).collect()
    }
}

/// Rayon-backed implementations.
#[cfg(feature = "parallel")]
pub mod parallel {
    use rayon::prelude::*;

    pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }

    pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }

    pub fn try_map_range<R, E, F>(n: usize, f: F) -> Result<Vec<R>, E>
    where
        R: Send,
        E: Send,
        F: Fn(usize) -> Result<R, E> + Sync + Send,
    {
        // Collect everything first so the reported error is the lowest index,
        // not whichever worker finished first.
        let all: Vec<Result<R, E>> = (0..n).into_par_iter().map(f).collect();
        all.into_iter().collect()
    }
}

#[cfg(feature = "parallel")]
pub use parallel::{map_range, map_slice, try_map_range};
#[cfg(not(feature = "parallel"))]
pub use seq::{map_range, map_slice, try_map_range};

/// Size the global worker pool. Only the first call has an effect; later
/// calls (and calls without the `parallel` feature) are ignored.
pub fn configure_threads(jobs: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;
}

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
