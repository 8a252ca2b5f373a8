//! Seeded synthetic paths on uniform grids.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)` with standard normal
//! draws from `rand_distr::StandardNormal`, drawn time-major (all components of
//! step 1, then step 2, ...). The same spec gives the same bits on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::Expr;
use crate::paths::{Interpolation, SampledPath};

fn one() -> f64 {
    1.0
}

fn one_str() -> String {
    "1".into()
}

fn default_dim() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// `x0 + μ t + σ W(t)`, with `W` a sum of `sqrt(T/N) Z` increments.
    Brownian {
        #[serde(default)]
        drift: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `x0 + e(t)` for an expression in `t`.
    Smooth { expression: String },
    /// `x0 + ∫_0^t r(s) ds` for a slope expression `r >= 0`, Simpson per cell.
    MonotoneBv {
        #[serde(default = "one_str")]
        slope: String,
    },
    /// `x0 + Σ_{k<K} 2^{-k/2} φ(2^k t / T)` with `φ(u)` the distance from `u` to the integers.
    /// Along dyadic partitions `[X]_n(T) = 1 - 2^{-n}` for `n <= K`.
    TakagiLike {
        /// Number of tent layers `K`; defaults to the grid's dyadic depth.
        #[serde(default)]
        terms: Option<u32>,
    },
    Constant {
        #[serde(default)]
        value: f64,
    },
}

/// A reproducible path recipe. `n` counts increments, so the path has `n + 1` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(alias = "base_points")]
    pub n: usize,
    #[serde(rename = "T", alias = "horizon", default = "one")]
    pub horizon: f64,
    #[serde(rename = "d", alias = "dim", default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub x0: f64,
    /// Replace every value `v` by `exp(v)`.
    #[serde(default)]
    pub exp: bool,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, n: usize) -> Self {
        Self { kind, seed: 0, n, horizon: 1.0, dim: 1, x0: 0.0, exp: false }
    }

    pub fn brownian(seed: u64, n: usize) -> Self {
        Self { seed, ..Self::new(GeneratorKind::Brownian { drift: 0.0, scale: 1.0 }, n) }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn with_exp(mut self) -> Self {
        self.exp = true;
        self
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || !self.n.is_power_of_two() {
            return Err(Error::InvalidSpec(format!("n = {} must be a positive power of two", self.n)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidSpec(format!("horizon {} must be positive", self.horizon)));
        }
        if self.dim == 0 {
            return Err(Error::InvalidSpec("dimension must be at least 1".into()));
        }
        if !self.x0.is_finite() {
            return Err(Error::InvalidSpec("x0 must be finite".into()));
        }
        match &self.kind {
            GeneratorKind::Brownian { drift, scale } if !(drift.is_finite() && scale.is_finite() && *scale >= 0.0) => {
                Err(Error::InvalidSpec(format!("brownian needs finite drift and scale >= 0, got {drift}, {scale}")))
            }
            GeneratorKind::Constant { value } if !value.is_finite() => {
                Err(Error::InvalidSpec("constant value must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

fn time_expr(source: &str) -> Result<Expr> {
    let e = Expr::parse(source)?;
    e.check_arity(0, 0)?;
    Ok(e)
}

fn tent(u: f64) -> f64 {
    (u - u.round()).abs()
}

/// Generates the path described by `spec` with a linear interpolation tag.
pub fn generate(spec: &GeneratorSpec) -> Result<SampledPath> {
    spec.validate()?;
    let (n, d, horizon) = (spec.n, spec.dim, spec.horizon);
    let times = SampledPath::uniform_grid(n, horizon);
    let mut values = vec![spec.x0; (n + 1) * d];
    match &spec.kind {
        GeneratorKind::Brownian { drift, scale } => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let sd = (horizon / n as f64).sqrt();
            let mut w = vec![0.0; d];
            for i in 1..=n {
                let dt = times[i] - times[i - 1];
                for (k, wk) in w.iter_mut().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    *wk += drift * dt + scale * sd * z;
                    values[i * d + k] = spec.x0 + *wk;
                }
            }
        }
        GeneratorKind::Smooth { expression } => {
            let e = time_expr(expression)?;
            for (i, &t) in times.iter().enumerate() {
                let v = spec.x0 + e.eval(t, &[], &[]);
                values[i * d..(i + 1) * d].fill(v);
            }
        }
        GeneratorKind::MonotoneBv { slope } => {
            let e = time_expr(slope)?;
            let r = |t: f64| -> Result<f64> {
                let v = e.eval(t, &[], &[]);
                if v.is_finite() && v >= 0.0 {
                    Ok(v)
                } else {
                    Err(Error::InvalidSpec(format!("slope {slope} is {v} at t = {t}; it must be finite and >= 0")))
                }
            };
            let mut acc = spec.x0;
            values[..d].fill(acc);
            for i in 1..=n {
                let (lo, hi) = (times[i - 1], times[i]);
                acc += (hi - lo) / 6.0 * (r(lo)? + 4.0 * r(0.5 * (lo + hi))? + r(hi)?);
                values[i * d..(i + 1) * d].fill(acc);
            }
        }
        GeneratorKind::TakagiLike { terms } => {
            let depth = terms.unwrap_or(n.trailing_zeros());
            for (i, &t) in times.iter().enumerate() {
                let u = t / horizon;
                let v: f64 = (0..depth).map(|k| 2f64.powf(-(k as f64) / 2.0) * tent(2f64.powi(k as i32) * u)).sum();
                values[i * d..(i + 1) * d].fill(spec.x0 + v);
            }
        }
        GeneratorKind::Constant { value } => values.fill(*value),
    }
    if spec.exp {
        for v in &mut values {
            *v = v.exp();
        }
    }
    SampledPath::from_flat(times, values, d, Interpolation::Linear)
}
