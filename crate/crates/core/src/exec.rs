//! Execution policy for the data-parallel loops.
//!
//! `Sequential` and `Parallel` produce bit-identical results: work is cut into
//! fixed-size chunks and the chunk partials are combined in index order, so
//! the thread count never changes the floating-point summation order.
//! `ParallelFast` lets rayon pick the reduction tree and is not bit-stable.
//! Without the `parallel` feature every mode runs sequentially.

use std::ops::Range;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
    ParallelFast,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self != Execution::Sequential
    }
}

/// Atoms per reduction chunk.
pub const CHUNK: usize = 1 << 14;

fn chunk_ranges(len: usize) -> impl Iterator<Item = Range<usize>> + Clone {
    (0..len.div_ceil(CHUNK)).map(move |c| c * CHUNK..((c + 1) * CHUNK).min(len))
}

/// Maps every chunk of `0..len` and folds the partials with `combine`.
pub fn chunked_reduce<T, M, C>(len: usize, exec: Execution, identity: T, map: M, combine: C) -> T
where
    T: Send + Sync + Clone,
    M: Fn(Range<usize>) -> T + Sync + Send,
    C: Fn(T, T) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            let ranges: Vec<_> = chunk_ranges(len).collect();
            let partials: Vec<T> = ranges.into_par_iter().map(&map).collect();
            partials.into_iter().fold(identity, &combine)
        }
        #[cfg(feature = "parallel")]
        Execution::ParallelFast => {
            use rayon::prelude::*;
            let ranges: Vec<_> = chunk_ranges(len).collect();
            ranges.into_par_iter().map(&map).reduce(|| identity.clone(), &combine)
        }
        _ => chunk_ranges(len).map(map).fold(identity, combine),
    }
}

/// Order-preserving map over `0..count`, one task per index.
pub fn map_indices<T, F>(count: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..count).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..count).map(f).collect()
}

/// Fills `out` in place, splitting it into `parts` equal slices processed
/// independently.
pub fn fill_parts<T, F>(out: &mut [T], parts: usize, exec: Execution, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if parts == 0 || out.is_empty() {
        return;
    }
    let size = out.len() / parts;
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        out.par_chunks_mut(size).enumerate().for_each(|(i, s)| f(i, s));
        return;
    }
    let _ = exec;
    for (i, s) in out.chunks_mut(size).enumerate() {
        f(i, s);
    }
}

/// Elementwise sum of two equal-length vectors.
pub fn add_vecs(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    if a.is_empty() {
        return b;
    }
    for (x, y) in a.iter_mut().zip(&b) {
        *x += y;
    }
    a
}
