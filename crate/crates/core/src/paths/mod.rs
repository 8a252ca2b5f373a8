//! Sampled paths, bounded-variation paths and refining partitions.
//!
//! A path is known on a finite, strictly increasing time grid starting at 0.
//! Between grid points it is either piecewise constant (càdlàg step) or
//! piecewise linear. Everything that evaluates functionals goes through the
//! [`Path`] trait so that stopped, stepped and bumped variants can be used as
//! cheap views instead of materialized copies.

mod csv_io;
mod partition;
mod view;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub use csv_io::{format_number, read_csv, read_csv_from, write_csv, write_csv_to};
pub use partition::{Level, PartitionSequence};
pub use view::{Bumped, ComponentSlice, PreStep, Stopped};

/// How a path is evaluated between its grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Right-continuous step: the value at `t` is the value at the largest grid time `<= t`.
    Step,
    /// Continuous, linear between grid points.
    Linear,
}

/// Index of the largest grid time `<= t`, clamped to the grid.
pub fn locate(times: &[f64], t: f64) -> usize {
    times.partition_point(|&s| s <= t).saturating_sub(1)
}

/// Exact grid lookup; `None` if `t` is not a grid time.
pub fn grid_index(times: &[f64], t: f64) -> Option<usize> {
    let i = locate(times, t);
    (times[i] == t).then_some(i)
}

/// Read access to a path on a shared time grid.
///
/// `node(i, k)` is the (right-continuous) value of component `k` at grid time
/// `times()[i]`; `left_limit(i, k)` is the limit from the left at that time.
pub trait Path {
    fn times(&self) -> &[f64];
    fn dim(&self) -> usize;
    fn interpolation(&self) -> Interpolation;
    fn node(&self, idx: usize, k: usize) -> f64;

    fn left_limit(&self, idx: usize, k: usize) -> f64 {
        match self.interpolation() {
            Interpolation::Step if idx > 0 => self.node(idx - 1, k),
            _ => self.node(idx, k),
        }
    }

    /// Value of component `k` at an arbitrary time in `[0, T]`.
    fn value(&self, t: f64, k: usize) -> f64 {
        let times = self.times();
        let i = locate(times, t);
        match self.interpolation() {
            Interpolation::Step => self.node(i, k),
            Interpolation::Linear => {
                if i + 1 >= times.len() || t <= times[i] {
                    self.node(i, k)
                } else {
                    let w = (t - times[i]) / (times[i + 1] - times[i]);
                    let lo = self.node(i, k);
                    lo + w * (self.left_limit(i + 1, k) - lo)
                }
            }
        }
    }

    fn horizon(&self) -> f64 {
        *self.times().last().expect("paths have at least two grid points")
    }

    fn len(&self) -> usize {
        self.times().len()
    }

    fn value_vec(&self, t: f64) -> Vec<f64> {
        (0..self.dim()).map(|k| self.value(t, k)).collect()
    }

    fn node_vec(&self, idx: usize) -> Vec<f64> {
        (0..self.dim()).map(|k| self.node(idx, k)).collect()
    }
}

impl<P: Path + ?Sized> Path for &P {
    fn times(&self) -> &[f64] {
        (**self).times()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn interpolation(&self) -> Interpolation {
        (**self).interpolation()
    }
    fn node(&self, idx: usize, k: usize) -> f64 {
        (**self).node(idx, k)
    }
    fn left_limit(&self, idx: usize, k: usize) -> f64 {
        (**self).left_limit(idx, k)
    }
    fn value(&self, t: f64, k: usize) -> f64 {
        (**self).value(t, k)
    }
}

/// A `d`-dimensional path known on a finite grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    times: Arc<[f64]>,
    values: Vec<f64>,
    dim: usize,
    interpolation: Interpolation,
}

fn validate_grid(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::InvalidPath("a path needs at least two grid points".into()));
    }
    if times[0] != 0.0 {
        return Err(Error::InvalidPath(format!("grid must start at 0, found {}", times[0])));
    }
    if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
        return Err(Error::InvalidPath(format!(
            "grid must be strictly increasing and finite ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

impl SampledPath {
    /// Builds a path from row-major values (`values[i * dim + k]`).
    pub fn from_flat(
        times: impl Into<Arc<[f64]>>,
        values: Vec<f64>,
        dim: usize,
        interpolation: Interpolation,
    ) -> Result<Self> {
        let times = times.into();
        validate_grid(&times)?;
        if dim == 0 {
            return Err(Error::InvalidPath("dimension must be at least 1".into()));
        }
        if values.len() != times.len() * dim {
            return Err(Error::InvalidPath(format!(
                "{} values do not fill {} grid points of dimension {dim}",
                values.len(),
                times.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPath("path values must be finite".into()));
        }
        Ok(Self { times, values, dim, interpolation })
    }

    pub fn new(
        times: impl Into<Arc<[f64]>>,
        rows: &[Vec<f64>],
        interpolation: Interpolation,
    ) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.len() });
        }
        Self::from_flat(times, rows.concat(), dim, interpolation)
    }

    pub fn scalar(
        times: impl Into<Arc<[f64]>>,
        values: Vec<f64>,
        interpolation: Interpolation,
    ) -> Result<Self> {
        Self::from_flat(times, values, 1, interpolation)
    }

    /// Samples `f(t)` (a `dim`-vector written into the slice) on every grid time.
    pub fn from_fn(
        times: impl Into<Arc<[f64]>>,
        dim: usize,
        interpolation: Interpolation,
        mut f: impl FnMut(f64, &mut [f64]),
    ) -> Result<Self> {
        let times: Arc<[f64]> = times.into();
        let mut values = vec![0.0; times.len() * dim];
        for (i, &t) in times.iter().enumerate() {
            f(t, &mut values[i * dim..(i + 1) * dim]);
        }
        Self::from_flat(times, values, dim, interpolation)
    }

    /// Copies any path view into an owned path on the same grid.
    pub fn materialize(path: &dyn Path) -> Result<Self> {
        let dim = path.dim();
        let n = path.len();
        let mut values = Vec::with_capacity(n * dim);
        for i in 0..n {
            values.extend((0..dim).map(|k| path.node(i, k)));
        }
        Self::from_flat(path.times().to_vec(), values, dim, path.interpolation())
    }

    /// Uniform grid `0, T/n, ..., T` with `n` cells.
    pub fn uniform_grid(n_cells: usize, horizon: f64) -> Arc<[f64]> {
        let dt = horizon / n_cells as f64;
        (0..=n_cells)
            .map(|i| if i == n_cells { horizon } else { i as f64 * dt })
            .collect()
    }

    pub fn shared_times(&self) -> &Arc<[f64]> {
        &self.times
    }

    pub fn row(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        self.values.iter().skip(k).step_by(self.dim).copied().collect()
    }

    pub fn flat_values(&self) -> &[f64] {
        &self.values
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    /// Applies `f` to every value, keeping grid and tag.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_flat(
            self.times.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
            self.dim,
            self.interpolation,
        )
    }

    pub fn same_grid(&self, other: &dyn Path) -> bool {
        let other = other.times();
        std::ptr::eq(self.times.as_ptr(), other.as_ptr()) || *self.times == *other
    }

    pub fn check_domain(&self, domain: &Domain) -> Result<()> {
        domain.check_path(self)
    }
}

impl Path for SampledPath {
    fn times(&self) -> &[f64] {
        &self.times
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn interpolation(&self) -> Interpolation {
        self.interpolation
    }
    #[inline]
    fn node(&self, idx: usize, k: usize) -> f64 {
        self.values[idx * self.dim + k]
    }
}

/// A continuous path whose components are of bounded variation.
///
/// The clock `A_0(t) = t` is not stored; operations that need it (horizontal
/// derivatives, Stieltjes integrals) add it as index 0. An `m = 0` path is
/// allowed and carries only the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BVPath {
    times: Arc<[f64]>,
    values: Vec<f64>,
    dim: usize,
}

impl BVPath {
    pub fn new(times: impl Into<Arc<[f64]>>, values: Vec<f64>, dim: usize) -> Result<Self> {
        let times = times.into();
        validate_grid(&times)?;
        if values.len() != times.len() * dim {
            return Err(Error::InvalidPath(format!(
                "{} values do not fill {} grid points of dimension {dim}",
                values.len(),
                times.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPath("path values must be finite".into()));
        }
        Ok(Self { times, values, dim })
    }

    /// The `m = 0` path on a grid.
    pub fn empty(times: impl Into<Arc<[f64]>>) -> Result<Self> {
        Self::new(times, Vec::new(), 0)
    }

    pub fn from_components(times: impl Into<Arc<[f64]>>, components: &[Vec<f64>]) -> Result<Self> {
        let times: Arc<[f64]> = times.into();
        let n = times.len();
        let dim = components.len();
        let mut values = vec![0.0; n * dim];
        for (k, c) in components.iter().enumerate() {
            if c.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: c.len() });
            }
            for (i, &v) in c.iter().enumerate() {
                values[i * dim + k] = v;
            }
        }
        Self::new(times, values, dim)
    }

    /// Reinterprets a sampled path as bounded-variation data (linear tag).
    pub fn from_path(path: &SampledPath) -> Result<Self> {
        Self::new(path.times.clone(), path.values.clone(), path.dim)
    }

    /// Stacks the components of several BV paths on a common grid.
    pub fn concat(parts: &[&BVPath]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidPath("nothing to concatenate".into()))?;
        if parts.iter().any(|p| *p.times != *first.times) {
            return Err(Error::GridMismatch);
        }
        let n = first.times.len();
        let dim: usize = parts.iter().map(|p| p.dim).sum();
        let mut values = Vec::with_capacity(n * dim);
        for i in 0..n {
            for p in parts {
                values.extend_from_slice(&p.values[i * p.dim..(i + 1) * p.dim]);
            }
        }
        Self::new(first.times.clone(), values, dim)
    }

    pub fn shared_times(&self) -> &Arc<[f64]> {
        &self.times
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        (0..self.times.len()).map(|i| self.values[i * self.dim + k]).collect()
    }

    /// Total variation of component `k`: the sum of absolute grid increments.
    pub fn total_variation(&self, k: usize) -> f64 {
        crate::stieltjes::total_variation(&self.component(k))
    }
}

impl Path for BVPath {
    fn times(&self) -> &[f64] {
        &self.times
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn interpolation(&self) -> Interpolation {
        Interpolation::Linear
    }
    #[inline]
    fn node(&self, idx: usize, k: usize) -> f64 {
        self.values[idx * self.dim + k]
    }
}

/// An open set a path must stay inside.
#[derive(Clone, Default)]
pub enum Domain {
    #[default]
    Whole,
    /// Open axis-aligned box `lower < x < upper` (componentwise).
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Predicate(Arc<dyn Fn(&[f64]) -> bool + Send + Sync>),
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Whole => f.write_str("Whole"),
            Domain::Box { lower, upper } => {
                f.debug_struct("Box").field("lower", lower).field("upper", upper).finish()
            }
            Domain::Predicate(_) => f.write_str("Predicate(..)"),
        }
    }
}

impl Domain {
    pub fn positive_orthant(dim: usize) -> Self {
        Domain::Box { lower: vec![0.0; dim], upper: vec![f64::INFINITY; dim] }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Whole => true,
            Domain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (lo, hi))| v > lo && v < hi),
            Domain::Predicate(p) => p(x),
        }
    }

    /// Checks every grid value and left limit.
    pub fn check_path(&self, path: &dyn Path) -> Result<()> {
        if matches!(self, Domain::Whole) {
            return Ok(());
        }
        let d = path.dim();
        let mut buf = vec![0.0; d];
        for i in 0..path.len() {
            for probe in [true, false] {
                for (k, b) in buf.iter_mut().enumerate() {
                    *b = if probe { path.node(i, k) } else { path.left_limit(i, k) };
                }
                if !self.contains(&buf) {
                    return Err(Error::Domain(format!(
                        "value {buf:?} at t = {} is outside the domain",
                        path.times()[i]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The path stopped at `t`, materialized on the same grid.
///
/// Exact at every grid point; between grid points the stored path follows the
/// input's interpolation tag. Use [`Stopped`] for an exact view.
pub fn stop(path: &SampledPath, t: f64) -> Result<SampledPath> {
    let horizon = path.horizon();
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::Domain(format!("stopping time {t} outside [0, {horizon}]")));
    }
    SampledPath::materialize(&Stopped::at(path, t))
}

/// The stepped approximation `X^n`: on each cell `[s, s')` of level `n` it takes
/// the look-ahead value `X(s')`, and `X^n(T) = X(T)`.
pub fn stepped_approx(path: &SampledPath, level: &Level) -> Result<SampledPath> {
    check_level_grid(path, level)?;
    let last = path.len() - 1;
    let dim = path.dim();
    let mut values = Vec::with_capacity(path.len() * dim);
    for i in 0..path.len() {
        let src = if i == last { last } else { level.successor_index(i) };
        values.extend_from_slice(path.row(src));
    }
    SampledPath::from_flat(path.times.clone(), values, dim, Interpolation::Step)
}

/// `X^{n,s-}`: the stepped path on `[0, s)` frozen at `X(s)` from `s` on.
pub fn pre_step(path: &SampledPath, level: &Level, s: f64) -> Result<SampledPath> {
    check_level_grid(path, level)?;
    let view = PreStep::at_time(path, level, s)?;
    SampledPath::materialize(&view)
}

fn check_level_grid(path: &SampledPath, level: &Level) -> Result<()> {
    if *path.times != **level.times() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Supremum distance `sup_u |p(u) - q(u)|` over grid values and left limits.
pub fn sup_distance(p: &dyn Path, q: &dyn Path) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), found: q.dim() });
    }
    if p.times() != q.times() {
        return Err(Error::GridMismatch);
    }
    let d = p.dim();
    let mut sup: f64 = 0.0;
    for i in 0..p.len() {
        let at_node: f64 = (0..d).map(|k| (p.node(i, k) - q.node(i, k)).powi(2)).sum();
        let at_left: f64 =
            (0..d).map(|k| (p.left_limit(i, k) - q.left_limit(i, k)).powi(2)).sum();
        sup = sup.max(at_node.sqrt()).max(at_left.sqrt());
    }
    Ok(sup)
}
