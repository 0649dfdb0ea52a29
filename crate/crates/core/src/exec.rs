//! Execution strategy for batch work.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Selects how batch operations iterate.
///
/// `Parallel` uses rayon when the crate is built with the `parallel`
/// feature; without it, `Parallel` silently runs sequentially. Results are
/// identical either way: every reduction used by the crate is
/// order-independent (min/max with total tie-breaks, or index-preserving
/// maps).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Maps `f` over `items`, preserving order.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }

    /// Maps a fallible `f` over `items`, returning the first error in index
    /// order.
    pub fn try_map<T, U, E, F>(self, items: &[T], f: F) -> Result<Vec<U>, E>
    where
        T: Sync,
        U: Send,
        E: Send,
        F: Fn(&T) -> Result<U, E> + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                // rayon's collect into Result short-circuits on an arbitrary
                // error; collect everything so the reported error is stable.
                let all: Vec<Result<U, E>> = items.par_iter().map(f).collect();
                all.into_iter().collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    /// Returns the element minimizing `key`, ties resolved by `Ord` on the
    /// full key. Keys must not be NaN.
    pub fn min_by_key<T, K, F>(self, items: &[T], key: F) -> Option<K>
    where
        T: Sync,
        K: Send + Copy + PartialOrd,
        F: Fn(&T) -> K + Sync + Send,
    {
        let pick = |a: K, b: K| if b < a { b } else { a };
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().map(key).reduce_with(pick),
            _ => items.iter().map(key).reduce(pick),
        }
    }
}
