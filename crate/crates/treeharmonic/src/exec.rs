//! Parallel/sequential execution shims.
//!
//! With the default `parallel` feature the heavy loops fan out through rayon;
//! without it they degrade to plain iterators. Both paths produce results in
//! input order, element by element, so outputs are bit-identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many work items the parallel path is not worth the fork-join
/// overhead and the sequential path is used even when `parallel` is enabled.
#[cfg(feature = "parallel")]
pub(crate) const PAR_THRESHOLD: usize = 2048;

/// Map over a slice, in parallel when available and worthwhile.
#[cfg(feature = "parallel")]
pub(crate) fn map_slice<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Send + Sync) -> Vec<U> {
    if items.len() >= 2 {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_slice<T, U>(items: &[T], f: impl Fn(&T) -> U) -> Vec<U> {
    items.iter().map(f).collect()
}
