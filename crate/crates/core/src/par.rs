//! Data-parallel helpers with a sequential fallback.
//!
//! Every parallel map here collects its results in index order, so callers
//! that reduce the output sequentially get the same bits regardless of the
//! number of worker threads. Without the `parallel` feature every
//! [`Execution`] runs sequentially.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Maps `f` over `0..len` and returns the results in index order.
pub fn map_indexed<T, F>(exec: Execution, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..len).into_par_iter().map(f).collect(),
        _ => (0..len).map(f).collect(),
    }
}

/// Maps `f` over a slice and returns the results in input order.
pub fn map_slice<S, T, F>(exec: Execution, items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

/// Pairwise (cascade) summation. Deterministic for a fixed input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Componentwise sum of equally sized vectors, reduced pairwise in input order.
pub fn pairwise_sum_vecs(vs: &[Vec<f64>], dim: usize) -> Vec<f64> {
    match vs.len() {
        0 => vec![0.0; dim],
        1 => vs[0].clone(),
        len => {
            let mid = len / 2;
            let mut left = pairwise_sum_vecs(&vs[..mid], dim);
            let right = pairwise_sum_vecs(&vs[mid..], dim);
            for (l, r) in left.iter_mut().zip(right) {
                *l += r;
            }
            left
        }
    }
}
