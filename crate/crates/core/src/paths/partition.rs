use std::sync::Arc;

use crate::error::{Error, Result};

/// Refining partitions of `[0, T]` obtained by dyadic thinning of a base grid.
///
/// Level `n` keeps every `2^(L-n)`-th grid point plus `T`, where `L` is the
/// smallest level whose partition is the whole base grid. Level 0 is `{0, T}`
/// when the number of cells is a power of two.
#[derive(Debug, Clone)]
pub struct PartitionSequence {
    times: Arc<[f64]>,
    max_level: usize,
}

impl PartitionSequence {
    pub fn dyadic(times: Arc<[f64]>) -> Self {
        let cells = times.len().saturating_sub(1).max(1);
        let max_level = cells.next_power_of_two().trailing_zeros() as usize;
        Self { times, max_level }
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    pub fn times(&self) -> &Arc<[f64]> {
        &self.times
    }

    pub fn level(&self, n: usize) -> Result<Level> {
        if n > self.max_level {
            return Err(Error::LevelOutOfRange { level: n, max: self.max_level });
        }
        let last = self.times.len() - 1;
        let stride = 1usize << (self.max_level - n);
        let mut indices: Vec<usize> = (0..=last).step_by(stride).collect();
        if *indices.last().unwrap() != last {
            indices.push(last);
        }
        Ok(Level { level: n, times: self.times.clone(), indices })
    }
}

/// One partition `T_n`, stored as indices into the base grid.
#[derive(Debug, Clone)]
pub struct Level {
    level: usize,
    times: Arc<[f64]>,
    indices: Vec<usize>,
}

impl Level {
    pub fn number(&self) -> usize {
        self.level
    }

    pub fn times(&self) -> &Arc<[f64]> {
        &self.times
    }

    /// Grid indices of the partition points, increasing, starting at 0 and ending at the last grid index.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        self.indices.iter().map(|&i| self.times[i])
    }

    pub fn num_cells(&self) -> usize {
        self.indices.len() - 1
    }

    pub fn mesh(&self) -> f64 {
        self.indices
            .windows(2)
            .map(|w| self.times[w[1]] - self.times[w[0]])
            .fold(0.0, f64::max)
    }

    /// Position in `indices()` of the partition point with grid index `grid_idx`.
    pub fn position(&self, grid_idx: usize) -> Option<usize> {
        self.indices.binary_search(&grid_idx).ok()
    }

    /// Grid index of the partition point `s <= times[grid_idx]` starting the cell that contains it.
    pub fn cell_start(&self, grid_idx: usize) -> usize {
        let pos = self.indices.partition_point(|&p| p <= grid_idx);
        self.indices[pos.saturating_sub(1)]
    }

    /// Grid index of the successor `s'`: the first partition point strictly
    /// after `grid_idx`, or the last grid index at `T`.
    pub fn successor_index(&self, grid_idx: usize) -> usize {
        let pos = self.indices.partition_point(|&p| p <= grid_idx);
        self.indices.get(pos).copied().unwrap_or(*self.indices.last().unwrap())
    }

    /// `t' = min{u in T_n : u > t}` for `t < T`, and `T' = T`.
    pub fn successor(&self, t: f64) -> f64 {
        let horizon = *self.times.last().unwrap();
        if t >= horizon {
            return horizon;
        }
        self.points().find(|&u| u > t).unwrap_or(horizon)
    }

    /// Grid index of `s`, requiring `s` to be a partition point.
    pub fn index_of(&self, s: f64) -> Result<usize> {
        let idx = super::grid_index(&self.times, s).ok_or(Error::NotGridPoint(s))?;
        self.position(idx)
            .map(|_| idx)
            .ok_or(Error::NotPartitionPoint { time: s, level: self.level })
    }
}
