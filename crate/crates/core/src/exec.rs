//! Execution mode for data-parallel loops.
//!
//! `Parallel` uses rayon when the `parallel` feature is enabled and falls back
//! to the sequential path otherwise. Results are always collected in index
//! order, so both modes produce identical output.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

/// Below this many items a parallel map runs sequentially.
#[cfg(feature = "parallel")]
const MIN_PARALLEL: usize = 2048;

impl Exec {
    /// Whether this build can actually run in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// `f(0), ..., f(len - 1)` in order.
    pub fn map_range<R, F>(self, len: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel && len >= MIN_PARALLEL {
            use rayon::prelude::*;
            return (0..len).into_par_iter().with_min_len(MIN_PARALLEL / 4).map(f).collect();
        }
        (0..len).map(f).collect()
    }

    /// Maps coarse-grained tasks (one per seed, say) regardless of count.
    pub fn map_tasks<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Applies `f(index, element)` to every element of `data`.
    pub fn for_each_mut<T, F>(self, data: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel && data.len() >= MIN_PARALLEL {
            use rayon::prelude::*;
            data.par_iter_mut()
                .with_min_len(MIN_PARALLEL / 4)
                .enumerate()
                .for_each(|(i, v)| f(i, v));
            return;
        }
        data.iter_mut().enumerate().for_each(|(i, v)| f(i, v));
    }
}
