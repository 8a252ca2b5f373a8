//! Deterministic summation.
//!
//! Every sum in the crate goes through a fixed evaluation order so results are
//! bit-identical across runs and across thread counts. Term evaluation may run
//! in parallel; the reduction tree never depends on how work was scheduled.

use rayon::prelude::*;

const BLOCK: usize = 64;

/// Pairwise sum over a fixed binary tree with sequential leaves of `BLOCK` terms.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= BLOCK {
        return xs.iter().fold(0.0, |acc, &x| acc + x);
    }
    let mid = split_point(xs.len());
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Same tree as [`pairwise_sum`], with the two halves reduced on the rayon pool.
pub fn par_pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= BLOCK * 64 {
        return pairwise_sum(xs);
    }
    let mid = split_point(xs.len());
    let (a, b) = rayon::join(|| par_pairwise_sum(&xs[..mid]), || par_pairwise_sum(&xs[mid..]));
    a + b
}

// Split on a multiple of BLOCK so the tree shape is independent of the caller.
fn split_point(len: usize) -> usize {
    let blocks = len.div_ceil(BLOCK);
    (blocks / 2) * BLOCK
}

/// Running sums `[0, x0, x0 + x1, ...]`, accumulated left to right.
pub fn prefix_sums(xs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for &x in xs {
        acc += x;
        out.push(acc);
    }
    out
}

/// Evaluates `f(0..n)` in order, optionally on the rayon pool.
pub fn map_terms<T, E, F>(n: usize, parallel: bool, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}
