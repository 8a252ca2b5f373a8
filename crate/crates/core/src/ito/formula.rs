//! Term-by-term check of the functional change-of-variable formula
//! `F(T) - F(0) = ∫∇F dX + Σ_i ∫𝒟_i F dA_i + ½ Σ_ij ∫∂_ij F d[X_i, X_j]`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{ito_integral, relative, AdmissibleIntegrand, IntegralResult, ItoOptions};
use crate::error::{Error, Result};
use crate::functionals::{check_dims, DynFunctional, Functional};
use crate::paths::{BVPath, PartitionSequence, Path, SampledPath};
use crate::qv::{qv_converged_levels, qv_matrix, QvConvergence, QvMatrix};
use crate::reduce::{map_terms, prefix_sums};

/// Horizontal and second vertical derivatives of `F` along `(X, A)`, sampled at
/// every grid time except `T`. These are the left-endpoint integrands of the
/// Stieltjes terms and do not depend on the partition level.
#[derive(Debug, Clone)]
pub struct Corrections {
    times: Arc<[f64]>,
    horizontal: Vec<DVector<f64>>,
    hessian: Vec<DMatrix<f64>>,
}

impl Corrections {
    pub fn compute(f: &dyn Functional, x: &SampledPath, a: &BVPath, parallel: bool) -> Result<Self> {
        check_dims(f, x, a)?;
        if a.times() != x.times() {
            return Err(Error::GridMismatch);
        }
        let times = x.shared_times().clone();
        let cells = times.len() - 1;
        let pairs = map_terms(cells, parallel, |u| {
            let t = times[u];
            Ok::<_, Error>((f.horizontal(t, x, a)?, f.vertical2(t, x, a)?))
        })?;
        let (horizontal, hessian) = pairs.into_iter().unzip();
        Ok(Self { times, horizontal, hessian })
    }

    pub fn horizontal_at(&self, u: usize) -> &DVector<f64> {
        &self.horizontal[u]
    }

    pub fn hessian_at(&self, u: usize) -> &DMatrix<f64> {
        &self.hessian[u]
    }

    /// `t ↦ Σ_i ∫_0^t w 𝒟_i F dA_i` on the grid, clock included; `w ≡ 1` when `weights` is `None`.
    pub fn horizontal_path(&self, a: &BVPath, weights: Option<&[f64]>) -> Result<Vec<f64>> {
        self.check_grid(a.times(), weights)?;
        let m = a.dim();
        let terms: Vec<f64> = (0..self.horizontal.len())
            .map(|u| {
                let dh = &self.horizontal[u];
                let mut s = dh[0] * (self.times[u + 1] - self.times[u]);
                for k in 0..m {
                    s += dh[k + 1] * (a.node(u + 1, k) - a.node(u, k));
                }
                weights.map_or(s, |w| w[u] * s)
            })
            .collect();
        Ok(prefix_sums(&terms))
    }

    /// `t ↦ ½ Σ_ij ∫_0^t w ∂_ij F d[X_i, X_j]` against the covariation path `q`.
    pub fn qv_path(&self, q: &QvMatrix, weights: Option<&[f64]>) -> Result<Vec<f64>> {
        self.check_grid(q.times(), weights)?;
        let d = q.dim();
        let terms: Vec<f64> = (0..self.hessian.len())
            .map(|u| {
                let h = &self.hessian[u];
                let mut s = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        s += h[(i, j)] * (q.get(u + 1, i, j) - q.get(u, i, j));
                    }
                }
                let s = 0.5 * s;
                weights.map_or(s, |w| w[u] * s)
            })
            .collect();
        Ok(prefix_sums(&terms))
    }

    fn check_grid(&self, times: &[f64], weights: Option<&[f64]>) -> Result<()> {
        if times != &self.times[..] {
            return Err(Error::GridMismatch);
        }
        match weights {
            Some(w) if w.len() < self.horizontal.len() => {
                Err(Error::DimensionMismatch { expected: self.horizontal.len(), found: w.len() })
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulaLevel {
    pub level: usize,
    /// `F(T, X, A) - F(0, X, A)`.
    pub lhs: f64,
    pub ito: f64,
    pub horizontal: f64,
    pub qv: f64,
    /// `lhs - (ito + horizontal + qv)`.
    pub residual: f64,
    /// `|residual| / max(|lhs|, |ito|, |horizontal|, |qv|)`.
    pub relative_residual: f64,
}

#[derive(Debug, Clone)]
pub struct FormulaReport {
    pub levels: Vec<FormulaLevel>,
    pub integral: IntegralResult,
    /// Cauchy diagnostics of `[X]`; `None` when fewer than three levels are requested.
    pub qv: Option<QvConvergence>,
}

impl FormulaReport {
    pub fn finest(&self) -> &FormulaLevel {
        self.levels.last().expect("at least one level")
    }
}

/// Evaluates each term of the change-of-variable formula for `F` along `(X, A)`
/// at every requested partition level.
pub fn ito_formula_report(
    f: &DynFunctional,
    x: &SampledPath,
    a: &BVPath,
    opts: &ItoOptions,
) -> Result<FormulaReport> {
    check_dims(f.as_ref(), x, a)?;
    if let Some(domain) = f.domain() {
        domain.check_path(x)?;
    }
    let seq = PartitionSequence::dyadic(x.shared_times().clone());
    let levels = opts.levels(&seq)?;
    let xi = AdmissibleIntegrand::new(f.clone(), a.clone())?;
    let integral = ito_integral(&xi, x, opts)?;
    let corrections = Corrections::compute(f.as_ref(), x, a, opts.parallel)?;
    let horizontal = *corrections.horizontal_path(a, None)?.last().unwrap();
    let lhs = f.eval(x.horizon(), x, a) - f.eval(x.times()[0], x, a);

    let mut rows = Vec::with_capacity(levels.len());
    for (li, &n) in levels.iter().enumerate() {
        let q = qv_matrix(x, &seq.level(n)?)?;
        let qv = *corrections.qv_path(&q, None)?.last().unwrap();
        let ito = integral.levels[li].terminal();
        let residual = lhs - (ito + horizontal + qv);
        rows.push(FormulaLevel {
            level: n,
            lhs,
            ito,
            horizontal,
            qv,
            residual,
            relative_residual: relative(residual, &[lhs, ito, horizontal, qv]),
        });
    }
    let qv = if levels.len() >= 3 {
        Some(qv_converged_levels(x, levels[0], *levels.last().unwrap(), opts.qv_tolerance)?)
    } else {
        None
    };
    Ok(FormulaReport { levels: rows, integral, qv })
}
