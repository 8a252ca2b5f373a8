//! Representing pathwise integrals as functionals of an augmented BV argument.

use nalgebra::{DMatrix, DVector};

use super::formula::Corrections;
use super::{integral_at_level, AdmissibleIntegrand, ItoOptions};
use crate::error::{Error, Result};
use crate::functionals::{check_dims, DynFunctional, Functional};
use crate::paths::{BVPath, ComponentSlice, Domain, Level, PartitionSequence, Path, SampledPath};
use crate::qv::qv_matrix;
use crate::reduce::{map_terms, prefix_sums};

/// `F̃_ℓ(t, X, Ã) = F_ℓ(t, X, A) - c_ℓ - Ã_{m+ℓ}(t)` where `A = (Ã_1..Ã_m)`.
///
/// Vertical derivatives are those of `F_ℓ`; the horizontal derivative along the
/// extra component `m + ℓ` is `-1` and zero along the others.
pub struct Augmented {
    f: DynFunctional,
    c: f64,
    nu: usize,
    ell: usize,
}

impl Augmented {
    pub fn new(f: DynFunctional, c: f64, nu: usize, ell: usize) -> Result<Self> {
        if ell >= nu {
            return Err(Error::InvalidSpec(format!("augmented index {ell} out of range for {nu} components")));
        }
        Ok(Self { f, c, nu, ell })
    }

    pub fn base(&self) -> &DynFunctional {
        &self.f
    }

    pub fn constant(&self) -> f64 {
        self.c
    }

    fn m(&self) -> usize {
        self.f.a_dim()
    }
}

impl Functional for Augmented {
    fn x_dim(&self) -> usize {
        self.f.x_dim()
    }
    fn a_dim(&self) -> usize {
        self.m() + self.nu
    }
    fn eval(&self, t: f64, x: &dyn Path, at: &dyn Path) -> f64 {
        let m = self.m();
        self.f.eval(t, x, &ComponentSlice::new(at, 0, m)) - self.c - at.value(t, m + self.ell)
    }
    fn vertical(&self, t: f64, x: &dyn Path, at: &dyn Path) -> Result<DVector<f64>> {
        self.f.vertical(t, x, &ComponentSlice::new(at, 0, self.m()))
    }
    fn vertical2(&self, t: f64, x: &dyn Path, at: &dyn Path) -> Result<DMatrix<f64>> {
        self.f.vertical2(t, x, &ComponentSlice::new(at, 0, self.m()))
    }
    fn horizontal(&self, t: f64, x: &dyn Path, at: &dyn Path) -> Result<DVector<f64>> {
        let m = self.m();
        let h = self.f.horizontal(t, x, &ComponentSlice::new(at, 0, m))?;
        let mut out = DVector::zeros(m + self.nu + 1);
        out.rows_mut(0, m + 1).copy_from(&h);
        out[m + 1 + self.ell] = -1.0;
        Ok(out)
    }
    fn domain(&self) -> Option<&Domain> {
        self.f.domain()
    }
}

/// `Ã = (A, A_{m+1}, ..., A_{m+ν})` and the functionals `F̃_ℓ` built at one level.
pub struct AugmentedSystem {
    pub level: usize,
    pub a_tilde: BVPath,
    pub functionals: Vec<DynFunctional>,
    /// `c_ℓ = F_ℓ(0, X, A)`, frozen from the path the system was built on.
    pub constants: Vec<f64>,
}

impl AugmentedSystem {
    /// `t ↦ F̃(t, X, Ã)` on the grid; equals the level-`n` integrals up to the formula residual.
    pub fn represent(&self, x: &SampledPath) -> Result<SampledPath> {
        let nu = self.functionals.len();
        let mut values = Vec::with_capacity(x.len() * nu);
        for &t in x.times() {
            for f in &self.functionals {
                values.push(f.eval(t, x, &self.a_tilde));
            }
        }
        SampledPath::from_flat(x.shared_times().clone(), values, nu, x.interpolation())
    }
}

pub(crate) fn check_family(fs: &[DynFunctional], x: &SampledPath, a: &BVPath) -> Result<()> {
    if fs.is_empty() {
        return Err(Error::InvalidSpec("at least one functional is required".into()));
    }
    if a.times() != x.times() {
        return Err(Error::GridMismatch);
    }
    for f in fs {
        check_dims(f.as_ref(), x, a)?;
        if let Some(domain) = f.domain() {
            domain.check_path(x)?;
        }
    }
    Ok(())
}

pub(crate) fn corrections(fs: &[DynFunctional], x: &SampledPath, a: &BVPath, parallel: bool) -> Result<Vec<Corrections>> {
    fs.iter().map(|f| Corrections::compute(f.as_ref(), x, a, parallel)).collect()
}

pub(crate) fn augment_with(
    fs: &[DynFunctional],
    corr: &[Corrections],
    x: &SampledPath,
    a: &BVPath,
    level: &Level,
) -> Result<AugmentedSystem> {
    let q = qv_matrix(x, level)?;
    let mut extra = Vec::with_capacity(fs.len());
    for c in corr {
        let h = c.horizontal_path(a, None)?;
        let v = c.qv_path(&q, None)?;
        extra.push(h.iter().zip(&v).map(|(h, v)| h + v).collect::<Vec<f64>>());
    }
    let extra = BVPath::from_components(x.shared_times().clone(), &extra)?;
    let a_tilde = BVPath::concat(&[a, &extra])?;
    let t0 = x.times()[0];
    let nu = fs.len();
    let constants: Vec<f64> = fs.iter().map(|f| f.eval(t0, x, a)).collect();
    let functionals = fs
        .iter()
        .zip(&constants)
        .enumerate()
        .map(|(l, (f, &c))| Ok(std::sync::Arc::new(Augmented::new(f.clone(), c, nu, l)?) as DynFunctional))
        .collect::<Result<_>>()?;
    Ok(AugmentedSystem { level: level.number(), a_tilde, functionals, constants })
}

/// Builds `Ã` with `A_{m+ℓ} = Σ_i ∫𝒟_i F_ℓ dA_i + ½ Σ_ij ∫∂_ij F_ℓ d[X_i, X_j]` at `level`.
pub fn augment(
    fs: &[DynFunctional],
    x: &SampledPath,
    a: &BVPath,
    level: usize,
    parallel: bool,
) -> Result<AugmentedSystem> {
    check_family(fs, x, a)?;
    let seq = PartitionSequence::dyadic(x.shared_times().clone());
    let corr = corrections(fs, x, a, parallel)?;
    augment_with(fs, &corr, x, a, &seq.level(level)?)
}

/// `Y_ℓ = ∫ ∇_X F_ℓ dX` at `level`, as a `ν`-dimensional path on the grid of `X`.
pub fn build_y(
    fs: &[DynFunctional],
    x: &SampledPath,
    a: &BVPath,
    level: usize,
    opts: &ItoOptions,
) -> Result<SampledPath> {
    check_family(fs, x, a)?;
    let seq = PartitionSequence::dyadic(x.shared_times().clone());
    build_y_at(fs, x, a, &seq.level(level)?, opts)
}

pub(crate) fn build_y_at(
    fs: &[DynFunctional],
    x: &SampledPath,
    a: &BVPath,
    level: &Level,
    opts: &ItoOptions,
) -> Result<SampledPath> {
    let nu = fs.len();
    let mut cols = Vec::with_capacity(nu);
    for f in fs {
        let xi = AdmissibleIntegrand::new(f.clone(), a.clone())?;
        cols.push(integral_at_level(&xi, x, level, opts.mode, opts.parallel)?.values);
    }
    let mut values = Vec::with_capacity(x.len() * nu);
    for i in 0..x.len() {
        values.extend(cols.iter().map(|c| c[i]));
    }
    SampledPath::from_flat(x.shared_times().clone(), values, nu, x.interpolation())
}

/// Comparison of `[Y]` computed directly with `Σ_ij ∫ ξ_(k),i ξ_(ℓ),j d[X_i, X_j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QvOfYReport {
    pub level: usize,
    /// `max_t |[Y_k, Y_ℓ](t) - Σ_ij ∫_0^t ξ_(k),i ξ_(ℓ),j d[X_i, X_j]|` per pair.
    pub residuals: DMatrix<f64>,
    pub max_residual: f64,
    /// `max_t max_k [Y_k](t)`.
    pub scale: f64,
    /// `max_residual / scale`, zero when both vanish.
    pub relative: f64,
}

pub(crate) fn gradients(fs: &[DynFunctional], x: &SampledPath, a: &BVPath, parallel: bool) -> Result<Vec<DMatrix<f64>>> {
    let (nu, d) = (fs.len(), x.dim());
    map_terms(x.len() - 1, parallel, |u| {
        let t = x.times()[u];
        let mut g = DMatrix::zeros(nu, d);
        for (l, f) in fs.iter().enumerate() {
            g.set_row(l, &f.vertical(t, x, a)?.transpose());
        }
        Ok::<_, Error>(g)
    })
}

pub(crate) fn qv_identity(y: &dyn Path, grads: &[DMatrix<f64>], x: &SampledPath, level: &Level) -> Result<QvOfYReport> {
    let qy = qv_matrix(y, level)?;
    let qx = qv_matrix(x, level)?;
    let (nu, d) = (y.dim(), x.dim());
    let mut residuals = DMatrix::zeros(nu, nu);
    for k in 0..nu {
        for l in k..nu {
            let terms: Vec<f64> = grads
                .iter()
                .enumerate()
                .map(|(u, g)| {
                    let mut s = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            s += g[(k, i)] * g[(l, j)] * (qx.get(u + 1, i, j) - qx.get(u, i, j));
                        }
                    }
                    s
                })
                .collect();
            let formula = prefix_sums(&terms);
            let r = formula
                .iter()
                .enumerate()
                .map(|(idx, v)| (qy.get(idx, k, l) - v).abs())
                .fold(0.0, f64::max);
            residuals[(k, l)] = r;
            residuals[(l, k)] = r;
        }
    }
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    let scale = (0..y.len())
        .flat_map(|idx| (0..nu).map(move |k| (idx, k)))
        .map(|(idx, k)| qy.get(idx, k, k))
        .fold(0.0, f64::max);
    let relative = if max_residual == 0.0 { 0.0 } else { max_residual / scale };
    Ok(QvOfYReport { level: level.number(), residuals, max_residual, scale, relative })
}

/// Checks the covariation identity for `Y = ∫ ∇F dX` built at `level`.
pub fn qv_of_y_check(
    fs: &[DynFunctional],
    x: &SampledPath,
    a: &BVPath,
    level: usize,
    opts: &ItoOptions,
) -> Result<QvOfYReport> {
    check_family(fs, x, a)?;
    let seq = PartitionSequence::dyadic(x.shared_times().clone());
    let lvl = seq.level(level)?;
    let y = build_y_at(fs, x, a, &lvl, opts)?;
    let grads = gradients(fs, x, a, opts.parallel)?;
    qv_identity(&y, &grads, x, &lvl)
}
