//! Associativity of the pathwise integral: `∫ η dY = ∫ η ∇F dX` for `Y = ∫ ∇F dX`,
//! and its decomposition when `Y = F(·, X, A)` itself.

use std::sync::Arc;

use super::augment::{augment_with, build_y_at, corrections, gradients, qv_identity, QvOfYReport};
use super::{integral_at_level, relative, AdmissibleIntegrand, ItoOptions};
use crate::error::{Error, Result};
use crate::functionals::{Compose, DynFunctional, FunctionalPath};
use crate::paths::{BVPath, PartitionSequence, Path, SampledPath};
use crate::qv::qv_matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct AssocLevel {
    pub level: usize,
    /// `∫_0^T η(s, Y) dY(s)` at this level.
    pub lhs: f64,
    /// `∫_0^T ζ(s, X) dX(s)` with `ζ = ∇_X G(·, F̃(·, X, Ã), B)`.
    pub rhs: f64,
    /// `|lhs - rhs|` at `T`.
    pub abs_residual: f64,
    /// `max_t |lhs(t) - rhs(t)|` over the grid.
    pub max_residual: f64,
    /// Previous level's `abs_residual` over this one; `NaN` on the first level.
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct AssocReport {
    pub levels: Vec<AssocLevel>,
    /// The QV-of-`Y` hypothesis at the finest level.
    pub gate: QvOfYReport,
}

impl AssocReport {
    pub fn finest(&self) -> &AssocLevel {
        self.levels.last().expect("at least one level")
    }
}

fn ratio(prev: Option<f64>, cur: f64) -> f64 {
    match prev {
        None => f64::NAN,
        Some(p) if p == 0.0 && cur == 0.0 => 1.0,
        Some(p) => p / cur,
    }
}

fn check_outer(eta: &DynFunctional, b: &BVPath, nu: usize, x: &SampledPath) -> Result<()> {
    if eta.x_dim() != nu {
        return Err(Error::DimensionMismatch { expected: eta.x_dim(), found: nu });
    }
    if eta.a_dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: eta.a_dim(), found: b.dim() });
    }
    if b.times() != x.times() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

fn gate(report: QvOfYReport, tol: f64) -> Result<QvOfYReport> {
    if report.relative > tol {
        return Err(Error::Hypothesis(format!(
            "quadratic variation of Y does not match the covariation formula at level {}: relative residual {:.3e} > {tol:.1e}",
            report.level, report.relative
        )));
    }
    Ok(report)
}

/// Compares `∫ η(s, Y, B) dY` with `∫ ∇_X G(s, F̃(·, X, Ã), B) dX` level by level,
/// where `Y_ℓ = ∫ ∇_X F_ℓ dX` and `G` is a primitive of `η` (`∇G = η`).
///
/// Fails with [`Error::Hypothesis`] if the covariation of `Y` does not match
/// `Σ ∫ ξ ξ d[X]` within `opts.gate_tolerance` at the finest level.
pub fn associativity_check(
    g: &DynFunctional,
    b: &BVPath,
    fs: &[DynFunctional],
    x: &SampledPath,
    a: &BVPath,
    opts: &ItoOptions,
) -> Result<AssocReport> {
    super::augment::check_family(fs, x, a)?;
    check_outer(g, b, fs.len(), x)?;
    let seq = PartitionSequence::dyadic(x.shared_times().clone());
    let levels = opts.levels(&seq)?;
    let finest = seq.level(*levels.last().unwrap())?;

    let grads = gradients(fs, x, a, opts.parallel)?;
    let y_finest = build_y_at(fs, x, a, &finest, opts)?;
    let gate = gate(qv_identity(&y_finest, &grads, x, &finest)?, opts.gate_tolerance)?;

    let corr = corrections(fs, x, a, opts.parallel)?;
    let eta = AdmissibleIntegrand::new(g.clone(), b.clone())?;
    let mut rows: Vec<AssocLevel> = Vec::with_capacity(levels.len());
    for &n in &levels {
        let level = seq.level(n)?;
        let y = build_y_at(fs, x, a, &level, opts)?;
        let lhs = integral_at_level(&eta, &y, &level, opts.mode, opts.parallel)?;
        let sys = augment_with(fs, &corr, x, a, &level)?;
        let h: DynFunctional = Arc::new(Compose::new(g.clone(), sys.functionals.clone())?);
        let ab = BVPath::concat(&[&sys.a_tilde, b])?;
        let zeta = AdmissibleIntegrand::new(h, ab)?;
        let rhs = integral_at_level(&zeta, x, &level, opts.mode, opts.parallel)?;
        let max_residual = lhs.values.iter().zip(&rhs.values).map(|(l, r)| (l - r).abs()).fold(0.0, f64::max);
        let abs_residual = (lhs.terminal() - rhs.terminal()).abs();
        rows.push(AssocLevel {
            level: n,
            lhs: lhs.terminal(),
            rhs: rhs.terminal(),
            abs_residual,
            max_residual,
            ratio: ratio(rows.last().map(|r| r.abs_residual), abs_residual),
        });
    }
    Ok(AssocReport { levels: rows, gate })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorollaryLevel {
    pub level: usize,
    /// `∫_0^T η(s, Y, B) dY(s)` with `Y = F(·, X, A)`.
    pub lhs: f64,
    /// `Σ_ℓ ∫ η_ℓ ∇_X F_ℓ dX`.
    pub ito: f64,
    /// `Σ_ℓ Σ_i ∫ η_ℓ 𝒟_i F_ℓ dA_i`.
    pub horizontal: f64,
    /// `½ Σ_ℓ Σ_ij ∫ η_ℓ ∂_ij F_ℓ d[X_i, X_j]`.
    pub qv: f64,
    pub residual: f64,
    pub relative_residual: f64,
    /// Previous level's `|residual|` over this one; `NaN` on the first level.
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct CorollaryReport {
    pub levels: Vec<CorollaryLevel>,
    pub gate: QvOfYReport,
}

impl CorollaryReport {
    pub fn finest(&self) -> &CorollaryLevel {
        self.levels.last().expect("at least one level")
    }
}

/// Decomposes `∫ η(s, Y, B) dY` for `Y = F(·, X, A)` into an integral against `X`,
/// horizontal Stieltjes terms and covariation terms, with the second-order term
/// weighted by `∂_ij F_ℓ`.
///
/// Gated like [`associativity_check`] on the covariation of `Y`.
pub fn corollary_decomposition(
    eta: &DynFunctional,
    b: &BVPath,
    fs: &[DynFunctional],
    x: &SampledPath,
    a: &BVPath,
    opts: &ItoOptions,
) -> Result<CorollaryReport> {
    super::augment::check_family(fs, x, a)?;
    check_outer(eta, b, fs.len(), x)?;
    let seq = PartitionSequence::dyadic(x.shared_times().clone());
    let levels = opts.levels(&seq)?;
    let finest = seq.level(*levels.last().unwrap())?;

    let y = SampledPath::materialize(&FunctionalPath::new(fs, x, a))?;
    let grads = gradients(fs, x, a, opts.parallel)?;
    let gate = gate(qv_identity(&y, &grads, x, &finest)?, opts.gate_tolerance)?;

    // η_ℓ(u, Y, B) at every left endpoint of the base grid.
    let weights: Vec<Vec<f64>> = {
        let rows = crate::reduce::map_terms(x.len() - 1, opts.parallel, |u| eta.vertical(x.times()[u], &y, b))?;
        (0..fs.len()).map(|l| rows.iter().map(|r| r[l]).collect()).collect()
    };
    let corr = corrections(fs, x, a, opts.parallel)?;
    let mut horizontal = 0.0;
    for (c, w) in corr.iter().zip(&weights) {
        horizontal += c.horizontal_path(a, Some(w))?.last().unwrap();
    }

    let lhs_integrand = AdmissibleIntegrand::new(eta.clone(), b.clone())?;
    let h: DynFunctional = Arc::new(Compose::new(eta.clone(), fs.to_vec())?);
    let ito_integrand = AdmissibleIntegrand::new(h, BVPath::concat(&[a, b])?)?;
    let mut rows: Vec<CorollaryLevel> = Vec::with_capacity(levels.len());
    for &n in &levels {
        let level = seq.level(n)?;
        let lhs = integral_at_level(&lhs_integrand, &y, &level, opts.mode, opts.parallel)?.terminal();
        let ito = integral_at_level(&ito_integrand, x, &level, opts.mode, opts.parallel)?.terminal();
        let q = qv_matrix(x, &level)?;
        let mut qv = 0.0;
        for (c, w) in corr.iter().zip(&weights) {
            qv += c.qv_path(&q, Some(w))?.last().unwrap();
        }
        let residual = lhs - (ito + horizontal + qv);
        rows.push(CorollaryLevel {
            level: n,
            lhs,
            ito,
            horizontal,
            qv,
            residual,
            relative_residual: relative(residual, &[lhs, ito, horizontal, qv]),
            ratio: ratio(rows.last().map(|r| r.residual.abs()), residual.abs()),
        });
    }
    Ok(CorollaryReport { levels: rows, gate })
}
