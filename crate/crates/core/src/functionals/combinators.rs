//! Product and composition of functionals.

use std::cell::RefCell;
use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::{DynFunctional, Functional};
use crate::error::{Error, Result};
use crate::paths::{grid_index, ComponentSlice, Interpolation, Path};

/// `(F G)(t, X, A)` with Leibniz-rule derivatives.
#[derive(Clone)]
pub struct Product {
    f: DynFunctional,
    g: DynFunctional,
}

impl Product {
    pub fn new(f: DynFunctional, g: DynFunctional) -> Result<Self> {
        if f.x_dim() != g.x_dim() || f.a_dim() != g.a_dim() {
            return Err(Error::InvalidSpec(format!(
                "product of functionals over (d, m) = ({}, {}) and ({}, {})",
                f.x_dim(),
                f.a_dim(),
                g.x_dim(),
                g.a_dim()
            )));
        }
        Ok(Self { f, g })
    }
}

impl Functional for Product {
    fn x_dim(&self) -> usize {
        self.f.x_dim()
    }
    fn a_dim(&self) -> usize {
        self.f.a_dim()
    }
    fn eval(&self, t: f64, x: &dyn Path, a: &dyn Path) -> f64 {
        self.f.eval(t, x, a) * self.g.eval(t, x, a)
    }
    fn vertical(&self, t: f64, x: &dyn Path, a: &dyn Path) -> Result<DVector<f64>> {
        let (fv, gv) = (self.f.eval(t, x, a), self.g.eval(t, x, a));
        Ok(self.f.vertical(t, x, a)? * gv + self.g.vertical(t, x, a)? * fv)
    }
    fn vertical2(&self, t: f64, x: &dyn Path, a: &dyn Path) -> Result<DMatrix<f64>> {
        let (fv, gv) = (self.f.eval(t, x, a), self.g.eval(t, x, a));
        let (df, dg) = (self.f.vertical(t, x, a)?, self.g.vertical(t, x, a)?);
        let cross = &df * dg.transpose();
        Ok(self.f.vertical2(t, x, a)? * gv + self.g.vertical2(t, x, a)? * fv + &cross + cross.transpose())
    }
    fn horizontal(&self, t: f64, x: &dyn Path, a: &dyn Path) -> Result<DVector<f64>> {
        let (fv, gv) = (self.f.eval(t, x, a), self.g.eval(t, x, a));
        Ok(self.f.horizontal(t, x, a)? * gv + self.g.horizontal(t, x, a)? * fv)
    }
}

/// The path `u ↦ (F_1, ..., F_ν)(u, X, A)` on the grid of `X`, evaluated on demand.
///
/// Grid values are cached per instance, so an outer functional that reads the
/// whole path costs one evaluation of each `F_ℓ` per grid time. Off-grid
/// times are evaluated directly.
pub struct FunctionalPath<'a> {
    fs: &'a [DynFunctional],
    x: &'a dyn Path,
    a: &'a dyn Path,
    cache: RefCell<HashMap<usize, Vec<f64>>>,
}

impl<'a> FunctionalPath<'a> {
    pub fn new(fs: &'a [DynFunctional], x: &'a dyn Path, a: &'a dyn Path) -> Self {
        Self { fs, x, a, cache: RefCell::new(HashMap::new()) }
    }
}

impl Path for FunctionalPath<'_> {
    fn times(&self) -> &[f64] {
        self.x.times()
    }
    fn dim(&self) -> usize {
        self.fs.len()
    }
    fn interpolation(&self) -> Interpolation {
        self.x.interpolation()
    }
    fn node(&self, idx: usize, k: usize) -> f64 {
        if let Some(v) = self.cache.borrow().get(&idx) {
            return v[k];
        }
        let t = self.x.times()[idx];
        let row: Vec<f64> = self.fs.iter().map(|f| f.eval(t, self.x, self.a)).collect();
        let v = row[k];
        self.cache.borrow_mut().insert(idx, row);
        v
    }
    fn value(&self, t: f64, k: usize) -> f64 {
        match grid_index(self.x.times(), t) {
            Some(idx) => self.node(idx, k),
            None => self.fs[k].eval(t, self.x, self.a),
        }
    }
}

/// `H(t, X, (A, B)) = G(t, F(·, X, A), B)`.
///
/// The BV argument of `H` is `A` (components `0..m`) followed by `B`
/// (components `m..m+p`). Derivatives follow the functional chain rule.
#[derive(Clone)]
pub struct Compose {
    outer: DynFunctional,
    inner: Vec<DynFunctional>,
    d: usize,
    m: usize,
    p: usize,
}

impl Compose {
    pub fn new(outer: DynFunctional, inner: Vec<DynFunctional>) -> Result<Self> {
        let first = inner
            .first()
            .ok_or_else(|| Error::InvalidSpec("compose needs at least one inner functional".into()))?;
        let (d, m) = (first.x_dim(), first.a_dim());
        if inner.iter().any(|f| f.x_dim() != d || f.a_dim() != m) {
            return Err(Error::InvalidSpec("inner functionals must share (d, m)".into()));
        }
        if outer.x_dim() != inner.len() {
            return Err(Error::DimensionMismatch { expected: outer.x_dim(), found: inner.len() });
        }
        let p = outer.a_dim();
        Ok(Self { outer, inner, d, m, p })
    }

    pub fn inner(&self) -> &[DynFunctional] {
        &self.inner
    }

    pub fn outer(&self) -> &DynFunctional {
        &self.outer
    }

    fn split<'a>(&self, ab: &'a dyn Path) -> (ComponentSlice<'a>, ComponentSlice<'a>) {
        (ComponentSlice::new(ab, 0, self.m), ComponentSlice::new(ab, self.m, self.p))
    }

    // ∂_ℓ G on the inner path, and the ν x d Jacobian (∂_i F_ℓ).
    fn first_order(
        &self,
        t: f64,
        y: &FunctionalPath<'_>,
        x: &dyn Path,
        a: &dyn Path,
        b: &dyn Path,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let dg = self.outer.vertical(t, y, b)?;
        let mut jac = DMatrix::zeros(self.inner.len(), self.d);
        for (l, f) in self.inner.iter().enumerate() {
            jac.set_row(l, &f.vertical(t, x, a)?.transpose());
        }
        Ok((dg, jac))
    }
}

impl Functional for Compose {
    fn x_dim(&self) -> usize {
        self.d
    }
    fn a_dim(&self) -> usize {
        self.m + self.p
    }
    fn eval(&self, t: f64, x: &dyn Path, ab: &dyn Path) -> f64 {
        let (a, b) = self.split(ab);
        let y = FunctionalPath::new(&self.inner, x, &a);
        self.outer.eval(t, &y, &b)
    }
    fn vertical(&self, t: f64, x: &dyn Path, ab: &dyn Path) -> Result<DVector<f64>> {
        let (a, b) = self.split(ab);
        let y = FunctionalPath::new(&self.inner, x, &a);
        let (dg, jac) = self.first_order(t, &y, x, &a, &b)?;
        Ok(jac.transpose() * dg)
    }
    fn vertical2(&self, t: f64, x: &dyn Path, ab: &dyn Path) -> Result<DMatrix<f64>> {
        let (a, b) = self.split(ab);
        let y = FunctionalPath::new(&self.inner, x, &a);
        let (dg, jac) = self.first_order(t, &y, x, &a, &b)?;
        let d2g = self.outer.vertical2(t, &y, &b)?;
        let mut out = jac.transpose() * d2g * &jac;
        for (l, f) in self.inner.iter().enumerate() {
            out += f.vertical2(t, x, &a)? * dg[l];
        }
        Ok(out)
    }
    fn horizontal(&self, t: f64, x: &dyn Path, ab: &dyn Path) -> Result<DVector<f64>> {
        let (a, b) = self.split(ab);
        let y = FunctionalPath::new(&self.inner, x, &a);
        let dg = self.outer.vertical(t, &y, &b)?;
        let hg = self.outer.horizontal(t, &y, &b)?;
        let mut out = DVector::zeros(self.m + self.p + 1);
        out[0] = hg[0];
        for (l, f) in self.inner.iter().enumerate() {
            let hf = f.horizontal(t, x, &a)?;
            for i in 0..=self.m {
                out[i] += dg[l] * hf[i];
            }
        }
        for j in 1..=self.p {
            out[self.m + j] = hg[j];
        }
        Ok(out)
    }
}
