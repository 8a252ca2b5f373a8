//! Pathwise Itô integrals of functional integrands and the identities built on them.
//!
//! At level `n` the integral is the non-anticipative sum
//! `I_n(t) = sum_{s in T_n, s' <= t} ξ(s, X^{n,s-}) · (X(s') - X(s))`, where
//! `X^{n,s-}` is the stepped approximation before its jump at `s`. Between
//! partition points `I_n` is extended by the clipped last term
//! `ξ(s, X^{n,s-}) · (X(t) - X(s))`.

mod assoc;
mod augment;
mod formula;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{check_dims, DynFunctional, Functional};
use crate::paths::{BVPath, Level, PartitionSequence, Path, PreStep, SampledPath};
use crate::reduce::{map_terms, prefix_sums};

pub use assoc::{
    associativity_check, corollary_decomposition, AssocLevel, AssocReport, CorollaryLevel,
    CorollaryReport,
};
pub use augment::{augment, build_y, qv_of_y_check, Augmented, AugmentedSystem, QvOfYReport};
pub use formula::{ito_formula_report, Corrections, FormulaLevel, FormulaReport};

/// `ξ(t, X) = ∇_X F(t, X, A)` for a functional `F` and a fixed BV path `A`.
#[derive(Clone)]
pub struct AdmissibleIntegrand {
    f: DynFunctional,
    a: BVPath,
}

impl AdmissibleIntegrand {
    pub fn new(f: DynFunctional, a: BVPath) -> Result<Self> {
        if a.dim() != f.a_dim() {
            return Err(Error::DimensionMismatch { expected: f.a_dim(), found: a.dim() });
        }
        Ok(Self { f, a })
    }

    /// An integrand whose functional takes no BV argument.
    pub fn without_bv(f: DynFunctional, times: impl Into<std::sync::Arc<[f64]>>) -> Result<Self> {
        Self::new(f, BVPath::empty(times)?)
    }

    pub fn functional(&self) -> &DynFunctional {
        &self.f
    }

    pub fn bv(&self) -> &BVPath {
        &self.a
    }

    pub fn xi(&self, t: f64, x: &dyn Path) -> Result<DVector<f64>> {
        self.f.vertical(t, x, &self.a)
    }
}

/// Where the integrand is evaluated in each partition cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumMode {
    /// `ξ(s, X^{n,s-})`, the definition of the pathwise integral.
    #[default]
    PreStep,
    /// `ξ(s, X)`: plain left-point Riemann sums, for comparison only.
    Riemann,
}

/// Level range, tolerances and execution options shared by the `ito` operations.
#[derive(Debug, Clone, PartialEq)]
pub struct ItoOptions {
    pub min_level: usize,
    /// Finest level; `None` means the base grid.
    pub max_level: Option<usize>,
    /// Relative Cauchy tolerance for integral convergence.
    pub tolerance: f64,
    /// Absolute tolerance on the last consecutive-level QV difference.
    pub qv_tolerance: f64,
    /// Relative tolerance of the QV-of-Y hypothesis gate.
    pub gate_tolerance: f64,
    pub mode: SumMode,
    /// Evaluate integrands on the rayon pool. Results do not depend on this flag.
    pub parallel: bool,
}

impl Default for ItoOptions {
    fn default() -> Self {
        Self {
            min_level: 0,
            max_level: None,
            tolerance: 1e-3,
            qv_tolerance: 5e-2,
            gate_tolerance: 5e-2,
            mode: SumMode::PreStep,
            parallel: true,
        }
    }
}

impl ItoOptions {
    pub fn levels(&self, seq: &PartitionSequence) -> Result<Vec<usize>> {
        let max = self.max_level.unwrap_or(seq.max_level());
        if max > seq.max_level() {
            return Err(Error::LevelOutOfRange { level: max, max: seq.max_level() });
        }
        if self.min_level > max {
            return Err(Error::InvalidSpec(format!("min level {} above max level {max}", self.min_level)));
        }
        Ok((self.min_level..=max).collect())
    }

    pub fn with_levels(mut self, min: usize, max: usize) -> Self {
        self.min_level = min;
        self.max_level = Some(max);
        self
    }
}

/// One level of an integral, reported on the whole base grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelIntegral {
    pub level: usize,
    /// `I_n` at every base-grid time.
    pub values: Vec<f64>,
    /// Grid indices of the partition points; other values use the clipped extension.
    pub partition: Vec<usize>,
}

impl LevelIntegral {
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("non-empty grid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegralResult {
    pub levels: Vec<LevelIntegral>,
    /// `max_t |I_{n+1}(t) - I_n(t)|` for consecutive levels.
    pub cauchy: Vec<f64>,
    pub tolerance: f64,
    /// Last Cauchy difference is at most `tolerance · max_t |I(t)|`.
    pub converged: bool,
}

impl IntegralResult {
    pub fn finest(&self) -> &LevelIntegral {
        self.levels.last().expect("at least one level")
    }

    pub fn terminal(&self) -> f64 {
        self.finest().terminal()
    }

    pub fn level(&self, n: usize) -> Option<&LevelIntegral> {
        self.levels.iter().find(|l| l.level == n)
    }
}

fn check_integrand(xi: &AdmissibleIntegrand, x: &dyn Path) -> Result<()> {
    check_dims(xi.f.as_ref(), x, &xi.a)?;
    if xi.a.times() != x.times() {
        return Err(Error::GridMismatch);
    }
    if let Some(domain) = xi.f.domain() {
        domain.check_path(x)?;
    }
    Ok(())
}

/// The level-`n` integral on the whole grid.
pub fn integral_at_level(
    xi: &AdmissibleIntegrand,
    x: &SampledPath,
    level: &Level,
    mode: SumMode,
    parallel: bool,
) -> Result<LevelIntegral> {
    check_integrand(xi, x)?;
    let idx = level.indices();
    let d = x.dim();
    let cells = idx.len() - 1;
    let integrands: Vec<DVector<f64>> = map_terms(cells, parallel, |j| {
        let s_idx = idx[j];
        let s = x.times()[s_idx];
        match mode {
            SumMode::PreStep => xi.xi(s, &PreStep::new_unchecked(x, level, s_idx)),
            SumMode::Riemann => xi.xi(s, x),
        }
    })?;
    let terms: Vec<f64> = (0..cells)
        .map(|j| {
            let (s, s_next) = (idx[j], idx[j + 1]);
            (0..d).map(|k| integrands[j][k] * (x.node(s_next, k) - x.node(s, k))).sum()
        })
        .collect();
    let at_partition = prefix_sums(&terms);
    let mut values = vec![0.0; x.len()];
    for j in 0..cells {
        let (s, s_next) = (idx[j], idx[j + 1]);
        values[s] = at_partition[j];
        for u in s + 1..s_next {
            let clipped: f64 = (0..d).map(|k| integrands[j][k] * (x.node(u, k) - x.node(s, k))).sum();
            values[u] = at_partition[j] + clipped;
        }
    }
    values[*idx.last().unwrap()] = at_partition[cells];
    Ok(LevelIntegral { level: level.number(), values, partition: idx.to_vec() })
}

/// Pathwise Itô integral `∫ ξ(s, X) dX(s)` at each requested level, with Cauchy diagnostics.
pub fn ito_integral(xi: &AdmissibleIntegrand, x: &SampledPath, opts: &ItoOptions) -> Result<IntegralResult> {
    let seq = PartitionSequence::dyadic(x.shared_times().clone());
    let mut levels = Vec::new();
    for n in opts.levels(&seq)? {
        levels.push(integral_at_level(xi, x, &seq.level(n)?, opts.mode, opts.parallel)?);
    }
    Ok(collect_levels(levels, opts.tolerance))
}

pub(crate) fn collect_levels(levels: Vec<LevelIntegral>, tolerance: f64) -> IntegralResult {
    let cauchy: Vec<f64> = levels
        .windows(2)
        .map(|w| w[0].values.iter().zip(&w[1].values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    let scale = levels.last().map_or(0.0, |l| l.values.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
    let converged = match cauchy.last() {
        Some(&c) => c == 0.0 || c <= tolerance * scale,
        None => false,
    };
    IntegralResult { levels, cauchy, tolerance, converged }
}

/// `max(|v|)` over the report terms, the scale used for relative residuals.
pub(crate) fn relative(residual: f64, terms: &[f64]) -> f64 {
    let scale = terms.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if residual == 0.0 {
        0.0
    } else {
        residual.abs() / scale
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::functionals::{Constant, Coordinate, Cylinder};
    use crate::paths::Interpolation;
    use crate::qv::qv_scalar;
    use crate::stieltjes::{stieltjes_integral, StieltjesMeasure};

    fn walk(n: usize, seed: u64) -> SampledPath {
        let mut state = seed;
        let mut x = 0.3;
        let mut vals = vec![x];
        for _ in 0..n {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            x += (u - 0.5) * (12.0 / n as f64).sqrt();
            vals.push(x);
        }
        SampledPath::scalar(SampledPath::uniform_grid(n, 1.0), vals, Interpolation::Linear).unwrap()
    }

    #[test]
    fn unit_integrand_telescopes() {
        let x = walk(256, 1);
        let xi = AdmissibleIntegrand::without_bv(Arc::new(Coordinate::new(1, 0, 0)), x.shared_times().clone())
            .unwrap();
        let r = ito_integral(&xi, &x, &ItoOptions::default()).unwrap();
        assert_eq!(r.levels.len(), 9);
        for l in &r.levels {
            assert!((l.terminal() - (x.node(256, 0) - x.node(0, 0))).abs() < 1e-12);
            for &p in &l.partition {
                assert!((l.values[p] - (x.node(p, 0) - x.node(0, 0))).abs() < 1e-12);
            }
            assert_eq!(l.values[0], 0.0);
        }
    }

    #[test]
    fn square_identity_per_level() {
        let x = walk(512, 2);
        let xi = AdmissibleIntegrand::without_bv(Arc::new(Cylinder::square(1, 0, 0)), x.shared_times().clone())
            .unwrap();
        let r = ito_integral(&xi, &x, &ItoOptions::default()).unwrap();
        let seq = PartitionSequence::dyadic(x.shared_times().clone());
        let (x0, xt) = (x.node(0, 0), x.node(512, 0));
        for l in &r.levels {
            let q = qv_scalar(&x.component(0), &seq.level(l.level).unwrap(), 1.0).unwrap();
            assert!((l.terminal() + q - (xt * xt - x0 * x0)).abs() < 1e-12, "level {}", l.level);
        }
    }

    #[test]
    fn bv_driver_matches_stieltjes() {
        let times = SampledPath::uniform_grid(1024, 1.0);
        let x = SampledPath::from_fn(times.clone(), 1, Interpolation::Linear, |t, v| v[0] = t + t * t).unwrap();
        let xi = AdmissibleIntegrand::without_bv(Arc::new(Cylinder::square(1, 0, 0)), times.clone()).unwrap();
        let r = ito_integral(&xi, &x, &ItoOptions::default()).unwrap();
        let integrand: Vec<f64> = x.component(0).iter().map(|v| 2.0 * v).collect();
        let mu = StieltjesMeasure::from_values(times, &x.component(0)).unwrap();
        let ls = stieltjes_integral(&integrand, &mu, 1.0).unwrap();
        let errs: Vec<f64> = r.levels.iter().map(|l| (l.terminal() - ls).abs()).collect();
        assert!(errs.last().unwrap() / ls.abs() < 1e-12);
        assert!(errs[8] < errs[7] && errs[7] < errs[6]);
    }

    #[test]
    fn constant_functional_gives_zero() {
        let x = walk(64, 3);
        let xi = AdmissibleIntegrand::without_bv(Arc::new(Constant::new(1, 0, 2.0)), x.shared_times().clone())
            .unwrap();
        let r = ito_integral(&xi, &x, &ItoOptions::default()).unwrap();
        assert!(r.levels.iter().all(|l| l.values.iter().all(|&v| v == 0.0)));
        assert!(r.converged);
    }

    #[test]
    fn riemann_mode_differs_from_pre_step_only_through_path_dependence() {
        // For a cylinder integrand both conventions read X(s) and agree exactly.
        let x = walk(128, 4);
        let xi = AdmissibleIntegrand::without_bv(Arc::new(Cylinder::exp(1, 0, 0)), x.shared_times().clone())
            .unwrap();
        let pre = ito_integral(&xi, &x, &ItoOptions::default()).unwrap();
        let opts = ItoOptions { mode: SumMode::Riemann, ..ItoOptions::default() };
        let riemann = ito_integral(&xi, &x, &opts).unwrap();
        assert_eq!(pre, riemann);
    }

    #[test]
    fn parallel_and_sequential_are_identical() {
        let x = walk(2048, 5);
        let xi = AdmissibleIntegrand::without_bv(Arc::new(Cylinder::exp(1, 0, 0)), x.shared_times().clone())
            .unwrap();
        let seq = ito_integral(&xi, &x, &ItoOptions { parallel: false, ..ItoOptions::default() }).unwrap();
        let par = ito_integral(&xi, &x, &ItoOptions::default()).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn domain_is_checked() {
        let x = walk(64, 6).map(|v| v - 10.0).unwrap();
        let xi = AdmissibleIntegrand::without_bv(Arc::new(Cylinder::log(1, 0, 0)), x.shared_times().clone())
            .unwrap();
        assert!(matches!(ito_integral(&xi, &x, &ItoOptions::default()), Err(Error::Domain(_))));
    }
}
