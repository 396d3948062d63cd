//! Index-ordered map over work items, parallel or sequential.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sequential,
    /// Falls back to sequential when built without the `parallel` feature.
    #[default]
    Parallel,
}

impl Mode {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Mode::Parallel
    }
}

/// `f(i)` for every `i` in `range`, collected in index order.
pub fn map_range<T, F>(mode: Mode, range: std::ops::Range<u64>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return range.into_par_iter().map(f).collect();
    }
    let _ = mode;
    range.map(f).collect()
}

/// Applies `f` to every element in place, passing its index.
pub fn for_each_indexed<T, F>(mode: Mode, items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
        return;
    }
    let _ = mode;
    items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

/// Sums `f(i)` elementwise into a fixed-length vector of counters.
/// Integer addition is associative, so the result is independent of
/// scheduling.
pub fn sum_counts<F>(mode: Mode, range: std::ops::Range<u64>, len: usize, f: F) -> Vec<u64>
where
    F: Fn(u64, &mut [u64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return range
            .into_par_iter()
            .fold(
                || vec![0u64; len],
                |mut acc, i| {
                    f(i, &mut acc);
                    acc
                },
            )
            .reduce(
                || vec![0u64; len],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
    }
    let _ = mode;
    let mut acc = vec![0u64; len];
    for i in range {
        f(i, &mut acc);
    }
    acc
}
