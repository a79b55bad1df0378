//! Data-parallel execution of independent work items.
//!
//! With the `parallel` feature, [`Execution::Parallel`] runs on the rayon
//! global pool; without it, it silently runs sequentially. Results are
//! always returned in index order, so reductions performed by the caller
//! are bit-identical across both modes.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of Monte Carlo episodes handled by one work item.
pub const CHUNK: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run work in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// `f(0), f(1), ..., f(n - 1)` in order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Splits `0..n` into [`CHUNK`]-sized ranges and maps `f` over them.
pub fn map_chunks<T, F>(exec: Execution, n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK) as usize;
    map_indexed(exec, chunks, |c| {
        let start = c as u64 * CHUNK;
        f(start..(start + CHUNK).min(n))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_range_in_order() {
        let parts = map_chunks(Execution::Parallel, 2 * CHUNK + 5, |r| r);
        assert_eq!(parts.len(), 3);
        assert_eq!(parts[0], 0..CHUNK);
        assert_eq!(parts[2], 2 * CHUNK..2 * CHUNK + 5);
        assert!(map_chunks(Execution::Sequential, 0, |r| r).is_empty());
    }

    #[test]
    fn modes_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        assert_eq!(
            map_indexed(Execution::Sequential, 1000, f),
            map_indexed(Execution::Parallel, 1000, f)
        );
    }
}
