//! Zero-copy path variants used when evaluating functionals.

use super::{locate, Interpolation, Level, Path};
use crate::error::{Error, Result};

/// A path stopped at a time, with an optional separate stopping time per component.
pub struct Stopped<'a> {
    inner: &'a dyn Path,
    stops: Vec<f64>,
}

impl<'a> Stopped<'a> {
    /// `X^t = (X(t ∧ s))_s`.
    pub fn at(inner: &'a dyn Path, t: f64) -> Self {
        Self { inner, stops: vec![t; inner.dim()] }
    }

    /// All components stopped at `t` except component `k`, stopped at `t_k`.
    pub fn with_component(inner: &'a dyn Path, t: f64, k: usize, t_k: f64) -> Self {
        let mut stops = vec![t; inner.dim()];
        stops[k] = t_k;
        Self { inner, stops }
    }
}

impl Path for Stopped<'_> {
    fn times(&self) -> &[f64] {
        self.inner.times()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn interpolation(&self) -> Interpolation {
        self.inner.interpolation()
    }
    fn node(&self, idx: usize, k: usize) -> f64 {
        let stop = self.stops[k];
        if self.inner.times()[idx] <= stop {
            self.inner.node(idx, k)
        } else {
            self.inner.value(stop, k)
        }
    }
    fn left_limit(&self, idx: usize, k: usize) -> f64 {
        let stop = self.stops[k];
        if self.inner.times()[idx] <= stop {
            self.inner.left_limit(idx, k)
        } else {
            self.inner.value(stop, k)
        }
    }
    fn value(&self, t: f64, k: usize) -> f64 {
        self.inner.value(t.min(self.stops[k]), k)
    }
}

/// `X^{n,s-}`: equal to the stepped approximation `X^n` on `[0, s)` and frozen
/// at `X(s)` on `[s, T]`.
pub struct PreStep<'a> {
    base: &'a dyn Path,
    level: &'a Level,
    s_idx: usize,
}

impl<'a> PreStep<'a> {
    /// `s_idx` must be the grid index of a partition point of `level`.
    pub fn new(base: &'a dyn Path, level: &'a Level, s_idx: usize) -> Result<Self> {
        if level.position(s_idx).is_none() {
            return Err(Error::NotPartitionPoint {
                time: base.times().get(s_idx).copied().unwrap_or(f64::NAN),
                level: level.number(),
            });
        }
        Ok(Self { base, level, s_idx })
    }

    pub fn at_time(base: &'a dyn Path, level: &'a Level, s: f64) -> Result<Self> {
        let idx = level.index_of(s)?;
        Self::new(base, level, idx)
    }

    pub(crate) fn new_unchecked(base: &'a dyn Path, level: &'a Level, s_idx: usize) -> Self {
        Self { base, level, s_idx }
    }
}

impl Path for PreStep<'_> {
    fn times(&self) -> &[f64] {
        self.base.times()
    }
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn interpolation(&self) -> Interpolation {
        Interpolation::Step
    }
    #[inline]
    fn node(&self, idx: usize, k: usize) -> f64 {
        if idx < self.s_idx {
            self.base.node(self.level.successor_index(idx), k)
        } else {
            self.base.node(self.s_idx, k)
        }
    }
    fn value(&self, t: f64, k: usize) -> f64 {
        let times = self.times();
        if t >= times[self.s_idx] {
            return self.base.node(self.s_idx, k);
        }
        self.node(locate(times, t), k)
    }
}

/// `X + v 1_{[t, T]}`: the vertical perturbation of a path at time `t`.
pub struct Bumped<'a> {
    inner: &'a dyn Path,
    t: f64,
    bump: Vec<f64>,
}

impl<'a> Bumped<'a> {
    pub fn new(inner: &'a dyn Path, t: f64, bump: Vec<f64>) -> Self {
        debug_assert_eq!(bump.len(), inner.dim());
        Self { inner, t, bump }
    }

    /// Bump of size `h` in coordinate `k` only.
    pub fn coordinate(inner: &'a dyn Path, t: f64, k: usize, h: f64) -> Self {
        let mut bump = vec![0.0; inner.dim()];
        bump[k] = h;
        Self::new(inner, t, bump)
    }
}

impl Path for Bumped<'_> {
    fn times(&self) -> &[f64] {
        self.inner.times()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn interpolation(&self) -> Interpolation {
        self.inner.interpolation()
    }
    fn node(&self, idx: usize, k: usize) -> f64 {
        let shift = if self.inner.times()[idx] >= self.t { self.bump[k] } else { 0.0 };
        self.inner.node(idx, k) + shift
    }
    fn left_limit(&self, idx: usize, k: usize) -> f64 {
        let shift = if self.inner.times()[idx] > self.t { self.bump[k] } else { 0.0 };
        self.inner.left_limit(idx, k) + shift
    }
    fn value(&self, t: f64, k: usize) -> f64 {
        let shift = if t >= self.t { self.bump[k] } else { 0.0 };
        self.inner.value(t, k) + shift
    }
}

/// Components `offset..offset + len` of a path.
pub struct ComponentSlice<'a> {
    inner: &'a dyn Path,
    offset: usize,
    len: usize,
}

impl<'a> ComponentSlice<'a> {
    pub fn new(inner: &'a dyn Path, offset: usize, len: usize) -> Self {
        debug_assert!(offset + len <= inner.dim());
        Self { inner, offset, len }
    }
}

impl Path for ComponentSlice<'_> {
    fn times(&self) -> &[f64] {
        self.inner.times()
    }
    fn dim(&self) -> usize {
        self.len
    }
    fn interpolation(&self) -> Interpolation {
        self.inner.interpolation()
    }
    fn node(&self, idx: usize, k: usize) -> f64 {
        self.inner.node(idx, self.offset + k)
    }
    fn left_limit(&self, idx: usize, k: usize) -> f64 {
        self.inner.left_limit(idx, self.offset + k)
    }
    fn value(&self, t: f64, k: usize) -> f64 {
        self.inner.value(t, self.offset + k)
    }
}
