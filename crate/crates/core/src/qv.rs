//! Föllmer quadratic variation and covariation along dyadic partitions.
//!
//! At level `n` the scalar sum is `Q_n(t) = sum_{s in T_n, s' <= t} (x(s') - x(s))^2
//! + (x(t) - x(s_t))^2`, where `s_t` starts the cell containing `t`. The clipped
//! last term keeps `t ↦ Q_n(t)` continuous along the grid. Off-diagonal entries
//! always come from polarization.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::paths::{grid_index, Level, PartitionSequence, Path};

/// `Q_n(u)` at every base-grid time `u`, for the scalar samples `x` (one per grid time).
pub fn qv_scalar_path(x: &[f64], level: &Level) -> Result<Vec<f64>> {
    let n = level.times().len();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x.len() });
    }
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for w in level.indices().windows(2) {
        let (s, s_next) = (w[0], w[1]);
        for u in s + 1..s_next {
            let d = x[u] - x[s];
            out[u] = acc + d * d;
        }
        let d = x[s_next] - x[s];
        acc += d * d;
        out[s_next] = acc;
    }
    Ok(out)
}

/// `Q_n(t)` for a grid time `t`.
pub fn qv_scalar(x: &[f64], level: &Level, t: f64) -> Result<f64> {
    let idx = grid_index(level.times(), t).ok_or(Error::NotGridPoint(t))?;
    let path = qv_scalar_path(x, level)?;
    Ok(path[idx])
}

/// Symmetric covariation matrices `[X_i, X_j](t)` at every grid time of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct QvMatrix {
    times: Arc<[f64]>,
    dim: usize,
    level: usize,
    // data[(idx * dim + i) * dim + j]
    data: Vec<f64>,
}

impl QvMatrix {
    pub fn times(&self) -> &Arc<[f64]> {
        &self.times
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    #[inline]
    pub fn get(&self, idx: usize, i: usize, j: usize) -> f64 {
        self.data[(idx * self.dim + i) * self.dim + j]
    }

    /// The path `t ↦ [X_i, X_j](t)` on the grid.
    pub fn entry_path(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.times.len()).map(|idx| self.get(idx, i, j)).collect()
    }

    pub fn at(&self, idx: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(idx, i, j))
    }

    pub fn terminal(&self) -> DMatrix<f64> {
        self.at(self.times.len() - 1)
    }

    /// Largest absolute entrywise difference at grid index `idx`.
    pub fn max_abs_diff_at(&self, other: &QvMatrix, idx: usize) -> f64 {
        let d2 = self.dim * self.dim;
        let a = &self.data[idx * d2..(idx + 1) * d2];
        let b = &other.data[idx * d2..(idx + 1) * d2];
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    /// `max_t max_ij |self - other|`.
    pub fn max_abs_diff(&self, other: &QvMatrix) -> f64 {
        (0..self.times.len()).map(|idx| self.max_abs_diff_at(other, idx)).fold(0.0, f64::max)
    }
}

/// Covariation matrix of a path at one level: diagonal from scalar sums,
/// off-diagonal from `½([X_i + X_j] - ([X_i] + [X_j]))`.
pub fn qv_matrix(x: &dyn Path, level: &Level) -> Result<QvMatrix> {
    if x.times() != &level.times()[..] {
        return Err(Error::GridMismatch);
    }
    let d = x.dim();
    let n = x.len();
    let comps: Vec<Vec<f64>> = (0..d).map(|k| (0..n).map(|i| x.node(i, k)).collect()).collect();
    let diag: Vec<Vec<f64>> = comps.iter().map(|c| qv_scalar_path(c, level)).collect::<Result<_>>()?;
    let mut data = vec![0.0; n * d * d];
    for i in 0..d {
        for idx in 0..n {
            data[(idx * d + i) * d + i] = diag[i][idx];
        }
        for j in i + 1..d {
            let sum: Vec<f64> = comps[i].iter().zip(&comps[j]).map(|(a, b)| a + b).collect();
            let s = qv_scalar_path(&sum, level)?;
            for idx in 0..n {
                let v = 0.5 * (s[idx] - (diag[i][idx] + diag[j][idx]));
                data[(idx * d + i) * d + j] = v;
                data[(idx * d + j) * d + i] = v;
            }
        }
    }
    Ok(QvMatrix { times: level.times().clone(), dim: d, level: level.number(), data })
}

/// Finest-level covariation with consecutive-level Cauchy diagnostics.
#[derive(Debug, Clone)]
pub struct QvConvergence {
    pub matrix: QvMatrix,
    /// Levels examined, coarsest first.
    pub levels: Vec<usize>,
    /// `max_t max_ij |[X]_{n+1}(t) - [X]_n(t)|` for consecutive levels.
    pub level_diffs: Vec<f64>,
    /// Per grid time, the last entry of `level_diffs` before taking the max over `t`.
    pub last_diff_path: Vec<f64>,
    pub tolerance: f64,
    /// The last consecutive-level difference is below `tolerance` (absolute).
    pub converged: bool,
}

/// Runs [`qv_matrix`] on levels `min_level..=max_level` and checks the last Cauchy difference.
pub fn qv_converged_levels(
    x: &dyn Path,
    min_level: usize,
    max_level: usize,
    tol: f64,
) -> Result<QvConvergence> {
    let seq = PartitionSequence::dyadic(x.times().to_vec().into());
    if max_level > seq.max_level() {
        return Err(Error::LevelOutOfRange { level: max_level, max: seq.max_level() });
    }
    if max_level < min_level + 2 {
        return Err(Error::InvalidSpec(format!(
            "quadratic variation diagnostics need at least 3 levels, got {min_level}..={max_level}"
        )));
    }
    let mut prev: Option<QvMatrix> = None;
    let mut level_diffs = Vec::new();
    let mut last_diff_path = Vec::new();
    for n in min_level..=max_level {
        let m = qv_matrix(x, &seq.level(n)?)?;
        if let Some(p) = &prev {
            last_diff_path = (0..x.len()).map(|idx| m.max_abs_diff_at(p, idx)).collect();
            level_diffs.push(last_diff_path.iter().copied().fold(0.0, f64::max));
        }
        prev = Some(m);
    }
    let converged = level_diffs.last().is_some_and(|&d| d < tol);
    Ok(QvConvergence {
        matrix: prev.expect("at least three levels"),
        levels: (min_level..=max_level).collect(),
        level_diffs,
        last_diff_path,
        tolerance: tol,
        converged,
    })
}

/// [`qv_converged_levels`] over every level of the dyadic sequence.
pub fn qv_converged(x: &dyn Path, tol: f64) -> Result<QvConvergence> {
    let max = PartitionSequence::dyadic(x.times().to_vec().into()).max_level();
    qv_converged_levels(x, 0, max, tol)
}
