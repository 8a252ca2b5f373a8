//! Built-in functionals with analytic derivatives.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::expr::Expr;
use super::{fd_horizontal, Functional, HorizontalSchedule};
use crate::error::{Error, Result};
use crate::paths::{BVPath, Domain, Interpolation, Level, Path};
use crate::qv::qv_scalar_path;

/// `X_i(t)`.
#[derive(Debug, Clone)]
pub struct Coordinate {
    d: usize,
    m: usize,
    index: usize,
}

impl Coordinate {
    pub fn new(d: usize, m: usize, index: usize) -> Self {
        assert!(index < d, "coordinate {index} out of range for d = {d}");
        Self { d, m, index }
    }
}

impl Functional for Coordinate {
    fn x_dim(&self) -> usize {
        self.d
    }
    fn a_dim(&self) -> usize {
        self.m
    }
    fn eval(&self, t: f64, x: &dyn Path, _a: &dyn Path) -> f64 {
        x.value(t, self.index)
    }
    fn vertical(&self, _t: f64, _x: &dyn Path, _a: &dyn Path) -> Result<DVector<f64>> {
        let mut g = DVector::zeros(self.d);
        g[self.index] = 1.0;
        Ok(g)
    }
    fn vertical2(&self, _t: f64, _x: &dyn Path, _a: &dyn Path) -> Result<DMatrix<f64>> {
        Ok(DMatrix::zeros(self.d, self.d))
    }
    fn horizontal(&self, _t: f64, _x: &dyn Path, _a: &dyn Path) -> Result<DVector<f64>> {
        Ok(DVector::zeros(self.m + 1))
    }
}

/// A constant functional.
#[derive(Debug, Clone)]
pub struct Constant {
    d: usize,
    m: usize,
    value: f64,
}

impl Constant {
    pub fn new(d: usize, m: usize, value: f64) -> Self {
        Self { d, m, value }
    }
}

impl Functional for Constant {
    fn x_dim(&self) -> usize {
        self.d
    }
    fn a_dim(&self) -> usize {
        self.m
    }
    fn eval(&self, _t: f64, _x: &dyn Path, _a: &dyn Path) -> f64 {
        self.value
    }
    fn vertical(&self, _t: f64, _x: &dyn Path, _a: &dyn Path) -> Result<DVector<f64>> {
        Ok(DVector::zeros(self.d))
    }
    fn vertical2(&self, _t: f64, _x: &dyn Path, _a: &dyn Path) -> Result<DMatrix<f64>> {
        Ok(DMatrix::zeros(self.d, self.d))
    }
    fn horizontal(&self, _t: f64, _x: &dyn Path, _a: &dyn Path) -> Result<DVector<f64>> {
        Ok(DVector::zeros(self.m + 1))
    }
}

/// `∫_0^t X_i(s) ds`, integrated exactly along the path's interpolation.
#[derive(Debug, Clone)]
pub struct TimeIntegral {
    d: usize,
    m: usize,
    index: usize,
}

impl TimeIntegral {
    pub fn new(d: usize, m: usize, index: usize) -> Self {
        assert!(index < d, "coordinate {index} out of range for d = {d}");
        Self { d, m, index }
    }

    /// `∫_0^t x_k(s) ds` for any path view.
    pub fn integrate(x: &dyn Path, k: usize, t: f64) -> f64 {
        let times = x.times();
        let linear = x.interpolation() == Interpolation::Linear;
        let mut acc = 0.0;
        for i in 0..times.len() - 1 {
            let (lo, hi) = (times[i], times[i + 1]);
            if lo >= t {
                break;
            }
            let left = x.node(i, k);
            if hi <= t {
                let right = if linear { x.left_limit(i + 1, k) } else { left };
                acc += 0.5 * (left + right) * (hi - lo);
            } else {
                let right = if linear { x.value(t, k) } else { left };
                acc += 0.5 * (left + right) * (t - lo);
            }
        }
        acc
    }
}

impl Functional for TimeIntegral {
    fn x_dim(&self) -> usize {
        self.d
    }
    fn a_dim(&self) -> usize {
        self.m
    }
    fn eval(&self, t: f64, x: &dyn Path, _a: &dyn Path) -> f64 {
        Self::integrate(x, self.index, t)
    }
    fn vertical(&self, _t: f64, _x: &dyn Path, _a: &dyn Path) -> Result<DVector<f64>> {
        Ok(DVector::zeros(self.d))
    }
    fn vertical2(&self, _t: f64, _x: &dyn Path, _a: &dyn Path) -> Result<DMatrix<f64>> {
        Ok(DMatrix::zeros(self.d, self.d))
    }
    fn horizontal(&self, t: f64, x: &dyn Path, _a: &dyn Path) -> Result<DVector<f64>> {
        let mut h = DVector::zeros(self.m + 1);
        h[0] = x.value(t, self.index);
        Ok(h)
    }
}

/// `A_k(t)`: a bounded-variation component read off directly.
#[derive(Debug, Clone)]
pub struct AComponent {
    d: usize,
    m: usize,
    index: usize,
}

impl AComponent {
    pub fn new(d: usize, m: usize, index: usize) -> Self {
        assert!(index < m, "A component {index} out of range for m = {m}");
        Self { d, m, index }
    }
}

impl Functional for AComponent {
    fn x_dim(&self) -> usize {
        self.d
    }
    fn a_dim(&self) -> usize {
        self.m
    }
    fn eval(&self, t: f64, _x: &dyn Path, a: &dyn Path) -> f64 {
        a.value(t, self.index)
    }
    fn vertical(&self, _t: f64, _x: &dyn Path, _a: &dyn Path) -> Result<DVector<f64>> {
        Ok(DVector::zeros(self.d))
    }
    fn vertical2(&self, _t: f64, _x: &dyn Path, _a: &dyn Path) -> Result<DMatrix<f64>> {
        Ok(DMatrix::zeros(self.d, self.d))
    }
    fn horizontal(&self, _t: f64, _x: &dyn Path, _a: &dyn Path) -> Result<DVector<f64>> {
        let mut h = DVector::zeros(self.m + 1);
        h[self.index + 1] = 1.0;
        Ok(h)
    }
}

/// Running integral `t ↦ ∫_0^t X_k(s) ds` on the grid.
pub fn time_integral_path(x: &dyn Path, k: usize) -> Result<BVPath> {
    let values: Vec<f64> = x.times().iter().map(|&t| TimeIntegral::integrate(x, k, t)).collect();
    BVPath::new(x.times().to_vec(), values, 1)
}

/// Running maximum `t ↦ max_{s <= t} X_k(s)` on the grid.
pub fn running_max_path(x: &dyn Path, k: usize) -> Result<BVPath> {
    let values: Vec<f64> = (0..x.len())
        .scan(f64::NEG_INFINITY, |m, i| {
            *m = m.max(x.node(i, k));
            Some(*m)
        })
        .collect();
    BVPath::new(x.times().to_vec(), values, 1)
}

/// Quadratic variation `t ↦ [X_k](t)` at one level, as a BV path.
pub fn qv_path(x: &dyn Path, k: usize, level: &Level) -> Result<BVPath> {
    let comp: Vec<f64> = (0..x.len()).map(|i| x.node(i, k)).collect();
    BVPath::new(x.times().to_vec(), qv_scalar_path(&comp, level)?, 1)
}

type ScalarFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;

/// A functional given by closures, with finite-difference derivatives.
#[derive(Clone)]
pub struct FnFunctional {
    d: usize,
    m: usize,
    f: Arc<dyn Fn(f64, &dyn Path, &dyn Path) -> f64 + Send + Sync>,
    domain: Option<Domain>,
}

impl FnFunctional {
    pub fn new(
        d: usize,
        m: usize,
        f: impl Fn(f64, &dyn Path, &dyn Path) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { d, m, f: Arc::new(f), domain: None }
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = Some(domain);
        self
    }
}

impl Functional for FnFunctional {
    fn x_dim(&self) -> usize {
        self.d
    }
    fn a_dim(&self) -> usize {
        self.m
    }
    fn eval(&self, t: f64, x: &dyn Path, a: &dyn Path) -> f64 {
        (self.f)(t, x, a)
    }
    fn domain(&self) -> Option<&Domain> {
        self.domain.as_ref()
    }
}

/// `f(t, X(t), A(t))` for a smooth `f`.
///
/// Each group of partials (`∇_x f`, the `x`-Hessian, `∂_t f`, `∇_a f`) is
/// optional; a missing group falls back to finite differences.
#[derive(Clone)]
pub struct Cylinder {
    d: usize,
    m: usize,
    f: ScalarFn,
    dx: Option<Vec<ScalarFn>>,
    dxx: Option<Vec<ScalarFn>>,
    dt: Option<ScalarFn>,
    da: Option<Vec<ScalarFn>>,
    domain: Option<Domain>,
}

/// Builder for [`Cylinder`].
pub struct CylinderBuilder {
    inner: Cylinder,
}

fn arc_fn(f: impl Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static) -> ScalarFn {
    Arc::new(f)
}

fn expr_fn(e: Expr) -> ScalarFn {
    Arc::new(move |t, x, a| e.eval(t, x, a))
}

impl CylinderBuilder {
    pub fn dx(mut self, dx: Vec<ScalarFn>) -> Self {
        assert_eq!(dx.len(), self.inner.d);
        self.inner.dx = Some(dx);
        self
    }

    /// Row-major `d x d` Hessian in `x`.
    pub fn dxx(mut self, dxx: Vec<ScalarFn>) -> Self {
        assert_eq!(dxx.len(), self.inner.d * self.inner.d);
        self.inner.dxx = Some(dxx);
        self
    }

    pub fn dt(mut self, dt: ScalarFn) -> Self {
        self.inner.dt = Some(dt);
        self
    }

    pub fn da(mut self, da: Vec<ScalarFn>) -> Self {
        assert_eq!(da.len(), self.inner.m);
        self.inner.da = Some(da);
        self
    }

    pub fn domain(mut self, domain: Domain) -> Self {
        self.inner.domain = Some(domain);
        self
    }

    pub fn build(self) -> Cylinder {
        self.inner
    }
}

impl Cylinder {
    pub fn builder(
        d: usize,
        m: usize,
        f: impl Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> CylinderBuilder {
        CylinderBuilder {
            inner: Cylinder { d, m, f: arc_fn(f), dx: None, dxx: None, dt: None, da: None, domain: None },
        }
    }

    /// Wraps a closure for use with the builder.
    pub fn partial(f: impl Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static) -> ScalarFn {
        arc_fn(f)
    }

    /// A cylinder from expression strings; `dxx` is row-major.
    pub fn from_exprs(
        d: usize,
        m: usize,
        f: &str,
        dx: Option<&[String]>,
        dxx: Option<&[String]>,
        dt: Option<&str>,
        da: Option<&[String]>,
    ) -> Result<Self> {
        let parse = |s: &str| -> Result<ScalarFn> {
            let e = Expr::parse(s)?;
            e.check_arity(d, m)?;
            Ok(expr_fn(e))
        };
        let parse_all = |v: &[String], want: usize, what: &str| -> Result<Vec<ScalarFn>> {
            if v.len() != want {
                return Err(Error::Expression(format!("{what}: expected {want} expressions, found {}", v.len())));
            }
            v.iter().map(|s| parse(s)).collect()
        };
        let mut b = CylinderBuilder {
            inner: Cylinder { d, m, f: parse(f)?, dx: None, dxx: None, dt: None, da: None, domain: None },
        };
        if let Some(v) = dx {
            b.inner.dx = Some(parse_all(v, d, "dx")?);
        }
        if let Some(v) = dxx {
            b.inner.dxx = Some(parse_all(v, d * d, "dxx")?);
        }
        if let Some(s) = dt {
            b.inner.dt = Some(parse(s)?);
        }
        if let Some(v) = da {
            b.inner.da = Some(parse_all(v, m, "da")?);
        }
        Ok(b.build())
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = Some(domain);
        self
    }

    /// `exp(X_i(t))`.
    pub fn exp(d: usize, m: usize, i: usize) -> Self {
        let dxx = (0..d * d)
            .map(|r| {
                if r == i * d + i {
                    arc_fn(move |_, x, _| x[i].exp())
                } else {
                    arc_fn(|_, _, _| 0.0)
                }
            })
            .collect();
        Self::builder(d, m, move |_, x, _| x[i].exp())
            .dx(unit_partials(d, i, move |x| x[i].exp()))
            .dxx(dxx)
            .dt(arc_fn(|_, _, _| 0.0))
            .da(vec![arc_fn(|_, _, _| 0.0); m])
            .build()
    }

    /// `X_i(t)^2`.
    pub fn square(d: usize, m: usize, i: usize) -> Self {
        let dxx = (0..d * d)
            .map(|r| if r == i * d + i { arc_fn(|_, _, _| 2.0) } else { arc_fn(|_, _, _| 0.0) })
            .collect();
        Self::builder(d, m, move |_, x, _| x[i] * x[i])
            .dx(unit_partials(d, i, move |x| 2.0 * x[i]))
            .dxx(dxx)
            .dt(arc_fn(|_, _, _| 0.0))
            .da(vec![arc_fn(|_, _, _| 0.0); m])
            .build()
    }

    /// `log X_i(t)` on `X_i > 0`.
    pub fn log(d: usize, m: usize, i: usize) -> Self {
        let dxx = (0..d * d)
            .map(|r| {
                if r == i * d + i {
                    arc_fn(move |_, x, _| -1.0 / (x[i] * x[i]))
                } else {
                    arc_fn(|_, _, _| 0.0)
                }
            })
            .collect();
        let domain = Domain::Predicate(Arc::new(move |x: &[f64]| x[i] > 0.0));
        Self::builder(d, m, move |_, x, _| x[i].ln())
            .dx(unit_partials(d, i, move |x| 1.0 / x[i]))
            .dxx(dxx)
            .dt(arc_fn(|_, _, _| 0.0))
            .da(vec![arc_fn(|_, _, _| 0.0); m])
            .domain(domain)
            .build()
    }

    fn args(&self, t: f64, x: &dyn Path, a: &dyn Path) -> (Vec<f64>, Vec<f64>) {
        (x.value_vec(t), a.value_vec(t))
    }

    fn check_point(&self, t: f64, xv: &[f64]) -> Result<()> {
        match &self.domain {
            Some(dom) if !dom.contains(xv) => {
                Err(Error::Domain(format!("X({t}) = {xv:?} is outside the domain")))
            }
            _ => Ok(()),
        }
    }
}

fn unit_partials(d: usize, i: usize, g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Vec<ScalarFn> {
    let g = Arc::new(g);
    (0..d)
        .map(|k| {
            if k == i {
                let g = g.clone();
                arc_fn(move |_, x, _| g(x))
            } else {
                arc_fn(|_, _, _| 0.0)
            }
        })
        .collect()
}

impl Functional for Cylinder {
    fn x_dim(&self) -> usize {
        self.d
    }
    fn a_dim(&self) -> usize {
        self.m
    }
    fn eval(&self, t: f64, x: &dyn Path, a: &dyn Path) -> f64 {
        let (xv, av) = self.args(t, x, a);
        (self.f)(t, &xv, &av)
    }
    fn vertical(&self, t: f64, x: &dyn Path, a: &dyn Path) -> Result<DVector<f64>> {
        let Some(dx) = &self.dx else {
            return super::fd_vertical(self, t, x, a, None);
        };
        let (xv, av) = self.args(t, x, a);
        self.check_point(t, &xv)?;
        Ok(DVector::from_iterator(self.d, dx.iter().map(|g| g(t, &xv, &av))))
    }
    fn vertical2(&self, t: f64, x: &dyn Path, a: &dyn Path) -> Result<DMatrix<f64>> {
        let Some(dxx) = &self.dxx else {
            return super::fd_jacobian_of_vertical(self, t, x, a, None);
        };
        let (xv, av) = self.args(t, x, a);
        self.check_point(t, &xv)?;
        Ok(DMatrix::from_row_iterator(self.d, self.d, dxx.iter().map(|g| g(t, &xv, &av))))
    }
    fn horizontal(&self, t: f64, x: &dyn Path, a: &dyn Path) -> Result<DVector<f64>> {
        let (xv, av) = self.args(t, x, a);
        self.check_point(t, &xv)?;
        let fd = if self.dt.is_none() || self.da.is_none() {
            Some(fd_horizontal(self, t, x, a, &HorizontalSchedule::default())?.values)
        } else {
            None
        };
        let mut h = DVector::zeros(self.m + 1);
        h[0] = match &self.dt {
            Some(g) => g(t, &xv, &av),
            None => fd.as_ref().unwrap()[0],
        };
        for k in 0..self.m {
            h[k + 1] = match &self.da {
                Some(gs) => gs[k](t, &xv, &av),
                None => fd.as_ref().unwrap()[k + 1],
            };
        }
        Ok(h)
    }
    fn domain(&self) -> Option<&Domain> {
        self.domain.as_ref()
    }
}
