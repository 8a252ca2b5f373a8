//! Non-anticipative functionals `F(t, X, A)` and their derivatives.
//!
//! `X` is a `d`-dimensional path, `A` an `m`-dimensional bounded-variation path.
//! The vertical derivative bumps `X` by `h e_i 1_{[t,T]}`; the horizontal
//! derivatives are with respect to the clock `A_0(t) = t` (index 0) and the
//! components of `A` (indices `1..=m`). Every derivative has a finite-difference
//! default so that user functionals only need `eval`.

mod builtin;
mod combinators;
pub mod expr;
mod regularity;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::paths::{Bumped, Domain, Path, Stopped};

pub use builtin::{
    qv_path, running_max_path, time_integral_path, AComponent, Constant, Coordinate, Cylinder,
    CylinderBuilder, FnFunctional, TimeIntegral,
};
pub use combinators::{Compose, FunctionalPath, Product};
pub use expr::Expr;
pub use regularity::{probe_regularity, ProbeResult, ProbeSchedule, RegularityReport};

/// A non-anticipative functional `F(t, X, A)`.
///
/// Implementations must only look at `X` and `A` on `[0, t]`. Analytic
/// derivatives override the finite-difference defaults.
pub trait Functional: Send + Sync {
    /// Dimension `d` of the driving path.
    fn x_dim(&self) -> usize;
    /// Dimension `m` of the bounded-variation argument (without the clock).
    fn a_dim(&self) -> usize;
    fn eval(&self, t: f64, x: &dyn Path, a: &dyn Path) -> f64;

    /// `∇_X F(t, X, A)`.
    fn vertical(&self, t: f64, x: &dyn Path, a: &dyn Path) -> Result<DVector<f64>> {
        fd_vertical(self, t, x, a, None)
    }

    /// `(∂_ij F(t, X, A))`, symmetric.
    fn vertical2(&self, t: f64, x: &dyn Path, a: &dyn Path) -> Result<DMatrix<f64>> {
        fd_vertical2(self, t, x, a, None)
    }

    /// `(𝒟_0 F, 𝒟_1 F, ..., 𝒟_m F)(t, X, A)`.
    fn horizontal(&self, t: f64, x: &dyn Path, a: &dyn Path) -> Result<DVector<f64>> {
        Ok(fd_horizontal(self, t, x, a, &HorizontalSchedule::default())?.values)
    }

    /// Open set the current value `X(t)` must lie in.
    fn domain(&self) -> Option<&Domain> {
        None
    }
}

impl<F: Functional + ?Sized> Functional for Arc<F> {
    fn x_dim(&self) -> usize {
        (**self).x_dim()
    }
    fn a_dim(&self) -> usize {
        (**self).a_dim()
    }
    fn eval(&self, t: f64, x: &dyn Path, a: &dyn Path) -> f64 {
        (**self).eval(t, x, a)
    }
    fn vertical(&self, t: f64, x: &dyn Path, a: &dyn Path) -> Result<DVector<f64>> {
        (**self).vertical(t, x, a)
    }
    fn vertical2(&self, t: f64, x: &dyn Path, a: &dyn Path) -> Result<DMatrix<f64>> {
        (**self).vertical2(t, x, a)
    }
    fn horizontal(&self, t: f64, x: &dyn Path, a: &dyn Path) -> Result<DVector<f64>> {
        (**self).horizontal(t, x, a)
    }
    fn domain(&self) -> Option<&Domain> {
        (**self).domain()
    }
}

/// Shared handle used by combinators and configs.
pub type DynFunctional = Arc<dyn Functional>;

/// Checks that `x` and `a` have the dimensions `f` expects.
pub fn check_dims(f: &(impl Functional + ?Sized), x: &dyn Path, a: &dyn Path) -> Result<()> {
    if x.dim() != f.x_dim() {
        return Err(Error::DimensionMismatch { expected: f.x_dim(), found: x.dim() });
    }
    if a.dim() != f.a_dim() {
        return Err(Error::DimensionMismatch { expected: f.a_dim(), found: a.dim() });
    }
    Ok(())
}

/// Default vertical bump `1e-4 (1 + max_i |X_i(t)|)`.
pub fn default_bump(t: f64, x: &dyn Path) -> f64 {
    let scale = (0..x.dim()).map(|k| x.value(t, k).abs()).fold(0.0, f64::max);
    1e-4 * (1.0 + scale)
}

// Which sides of `X(t)` in direction `k` stay inside the domain.
fn bump_sides(
    f: &(impl Functional + ?Sized),
    t: f64,
    x: &dyn Path,
    k: usize,
    h: f64,
) -> Result<(bool, bool)> {
    let Some(domain) = f.domain() else {
        return Ok((true, true));
    };
    let mut v = x.value_vec(t);
    if !domain.contains(&v) {
        return Err(Error::Domain(format!("X({t}) = {v:?} is outside the domain")));
    }
    let base = v[k];
    v[k] = base + h;
    let up = domain.contains(&v);
    v[k] = base - h;
    let down = domain.contains(&v);
    if !up && !down {
        return Err(Error::Domain(format!("bump of size {h} at t = {t} leaves the domain on both sides")));
    }
    Ok((up, down))
}

/// Central-difference vertical gradient; one-sided where a bump would leave the domain.
pub fn fd_vertical(
    f: &(impl Functional + ?Sized),
    t: f64,
    x: &dyn Path,
    a: &dyn Path,
    h: Option<f64>,
) -> Result<DVector<f64>> {
    let d = f.x_dim();
    let h = h.unwrap_or_else(|| default_bump(t, x));
    let mut grad = DVector::zeros(d);
    for k in 0..d {
        let (up, down) = bump_sides(f, t, x, k, h)?;
        let plus = || f.eval(t, &Bumped::coordinate(x, t, k, h), a);
        let minus = || f.eval(t, &Bumped::coordinate(x, t, k, -h), a);
        grad[k] = match (up, down) {
            (true, true) => (plus() - minus()) / (2.0 * h),
            (true, false) => (plus() - f.eval(t, x, a)) / h,
            _ => (f.eval(t, x, a) - minus()) / h,
        };
    }
    Ok(grad)
}

/// Second vertical derivatives from central differences of `eval`.
pub fn fd_vertical2(
    f: &(impl Functional + ?Sized),
    t: f64,
    x: &dyn Path,
    a: &dyn Path,
    h: Option<f64>,
) -> Result<DMatrix<f64>> {
    let d = f.x_dim();
    let h = h.unwrap_or_else(|| default_bump(t, x));
    if let Some(domain) = f.domain() {
        let v = x.value_vec(t);
        let reach: Vec<f64> = v.iter().map(|c| c + 2.0 * h).collect();
        let low: Vec<f64> = v.iter().map(|c| c - 2.0 * h).collect();
        if !domain.contains(&reach) || !domain.contains(&low) {
            return Err(Error::Domain(format!(
                "second-difference stencil of size {h} at t = {t} leaves the domain"
            )));
        }
    }
    let eval_at = |bump: Vec<f64>| f.eval(t, &Bumped::new(x, t, bump), a);
    let centre = f.eval(t, x, a);
    let mut hess = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = h;
        let plus = eval_at(e.clone());
        e[i] = -h;
        let minus = eval_at(e);
        hess[(i, i)] = (plus - 2.0 * centre + minus) / (h * h);
        for j in i + 1..d {
            let corner = |si: f64, sj: f64| {
                let mut e = vec![0.0; d];
                e[i] = si * h;
                e[j] = sj * h;
                eval_at(e)
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(hess)
}

/// Second vertical derivatives as the central difference of `f.vertical`, symmetrized.
///
/// More accurate than [`fd_vertical2`] when `f.vertical` is analytic.
pub fn fd_jacobian_of_vertical(
    f: &(impl Functional + ?Sized),
    t: f64,
    x: &dyn Path,
    a: &dyn Path,
    h: Option<f64>,
) -> Result<DMatrix<f64>> {
    let d = f.x_dim();
    let h = h.unwrap_or_else(|| default_bump(t, x));
    let mut jac = DMatrix::zeros(d, d);
    for i in 0..d {
        let (up, down) = bump_sides(f, t, x, i, h)?;
        let plus = || f.vertical(t, &Bumped::coordinate(x, t, i, h), a);
        let minus = || f.vertical(t, &Bumped::coordinate(x, t, i, -h), a);
        let col = match (up, down) {
            (true, true) => (plus()? - minus()?) / (2.0 * h),
            (true, false) => (plus()? - f.vertical(t, x, a)?) / h,
            _ => (f.vertical(t, x, a)? - minus()?) / h,
        };
        jac.set_column(i, &col);
    }
    Ok((&jac + jac.transpose()) * 0.5)
}

/// Step sizes for horizontal difference quotients, as fractions of the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalSchedule {
    pub fractions: Vec<f64>,
}

impl Default for HorizontalSchedule {
    fn default() -> Self {
        Self { fractions: vec![1e-3, 1e-4, 1e-5, 1e-6] }
    }
}

impl HorizontalSchedule {
    pub fn single(fraction: f64) -> Self {
        Self { fractions: vec![fraction] }
    }
}

/// Horizontal derivative estimate with per-component diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalEstimate {
    /// `(𝒟_0, ..., 𝒟_m)`.
    pub values: DVector<f64>,
    /// `underdetermined[k]`: `A_k` was flat at every probe step, so `𝒟_k` is reported as 0.
    pub underdetermined: Vec<bool>,
    /// The step `h` used for each component (0 when underdetermined).
    pub steps: Vec<f64>,
}

/// Horizontal derivatives by one-sided difference quotients.
///
/// `𝒟_0 F ≈ (F(t+h, X^t, A^t) - F(t, X^t, A^t)) / h`. For `k >= 1` only `A_k` is
/// released up to `t + h`: `𝒟_k F ≈ (F(t+h, X^t, A^{t; k, t+h}) - F(t+h, X^t, A^t)) /
/// (A_k(t+h) - A_k(t))`, taken at the smallest scheduled `h` with a nonzero
/// increment. Both quotients are evaluated at `t + h`: evaluated at `t` the
/// released component would be cut back to `A_k^t` by non-anticipativity.
/// Near `T` the quotients are taken over `[t-h, t]` with the paths stopped at `t-h`.
pub fn fd_horizontal(
    f: &(impl Functional + ?Sized),
    t: f64,
    x: &dyn Path,
    a: &dyn Path,
    schedule: &HorizontalSchedule,
) -> Result<HorizontalEstimate> {
    let m = f.a_dim();
    let horizon = x.horizon();
    if schedule.fractions.is_empty() || schedule.fractions.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
        return Err(Error::InvalidSpec("horizontal step fractions must lie in (0, 1)".into()));
    }
    let mut values = DVector::zeros(m + 1);
    let mut underdetermined = vec![false; m + 1];
    let mut steps = vec![0.0; m + 1];

    let base_point = |h: f64| if t + h <= horizon { t } else { t - h };

    let h0 = schedule.fractions.last().unwrap() * horizon;
    let s = base_point(h0);
    let xs = Stopped::at(x, s);
    let as_ = Stopped::at(a, s);
    values[0] = (f.eval(s + h0, &xs, &as_) - f.eval(s, &xs, &as_)) / h0;
    steps[0] = h0;

    for k in 0..m {
        let mut found = false;
        for frac in schedule.fractions.iter().rev() {
            let h = frac * horizon;
            let s = base_point(h);
            let da = a.value(s + h, k) - a.value(s, k);
            if da == 0.0 {
                continue;
            }
            let xs = Stopped::at(x, s);
            let frozen = Stopped::at(a, s);
            let released = Stopped::with_component(a, s, k, s + h);
            values[k + 1] = (f.eval(s + h, &xs, &released) - f.eval(s + h, &xs, &frozen)) / da;
            steps[k + 1] = h;
            found = true;
            break;
        }
        underdetermined[k + 1] = !found;
    }
    Ok(HorizontalEstimate { values, underdetermined, steps })
}
