//! Node-level execution: sequential node order or rayon data parallelism.
//!
//! Every helper returns results in node order, so reductions over them are
//! identical in both modes.

use serde::{Deserialize, Serialize};

/// Smallest number of nodes handed to one rayon task.
pub const MIN_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    Sequential,
    /// Falls back to sequential when built without the `parallel` feature.
    #[default]
    Parallel,
}

impl ExecMode {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

/// Applies `f` to every item and returns the outputs in item order.
pub fn map_mut<T, R, F>(mode: ExecMode, items: &mut [T], f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(usize, &mut T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter_mut().with_min_len(MIN_CHUNK).enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let _ = mode;
    items.iter_mut().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Maps a shared slice, returning outputs in item order.
pub fn map<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().with_min_len(MIN_CHUNK).map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// First error in item order, otherwise all values.
pub fn collect_ordered<R, E>(results: Vec<Result<R, E>>) -> Result<Vec<R>, E> {
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_preserve_order() {
        for mode in [ExecMode::Sequential, ExecMode::Parallel] {
            let mut v: Vec<u64> = (0..1000).collect();
            let out = map_mut(mode, &mut v, |i, x| {
                *x *= 2;
                i as u64 + *x
            });
            assert_eq!(out, (0..1000).map(|i| 3 * i).collect::<Vec<_>>());
            assert_eq!(map(mode, &v, |x| x + 1)[999], 1999);
        }
    }

    #[test]
    fn first_error_wins() {
        let r: Vec<Result<u8, u8>> = vec![Ok(1), Err(2), Err(3)];
        assert_eq!(collect_ordered(r), Err(2));
    }
}
