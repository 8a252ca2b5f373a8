//! Lebesgue–Stieltjes integration against bounded-variation grid paths.
//!
//! Integrals are left-endpoint sums over base-grid cells,
//! `sum_i f(t_i) (A(t_{i+1}) - A(t_i))`, which is the same non-anticipative
//! convention used by the pathwise Itô sums. For a piecewise-linear `A` and an
//! integrand that is constant on grid cells these sums are exact.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::paths::{grid_index, BVPath};
use crate::reduce::{pairwise_sum, prefix_sums};

/// The signed measure `dA` of a BV path component on a grid, stored as cell increments.
#[derive(Debug, Clone, PartialEq)]
pub struct StieltjesMeasure {
    times: Arc<[f64]>,
    increments: Vec<f64>,
}

impl StieltjesMeasure {
    /// `dA_0 = dt`.
    pub fn clock(times: Arc<[f64]>) -> Self {
        let increments = times.windows(2).map(|w| w[1] - w[0]).collect();
        Self { times, increments }
    }

    pub fn from_values(times: Arc<[f64]>, values: &[f64]) -> Result<Self> {
        if values.len() != times.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), found: values.len() });
        }
        let increments = values.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self { times, increments })
    }

    pub fn component(a: &BVPath, k: usize) -> Self {
        let values = a.component(k);
        let increments = values.windows(2).map(|w| w[1] - w[0]).collect();
        Self { times: a.shared_times().clone(), increments }
    }

    /// Index 0 is the clock, index `i >= 1` is component `i - 1` of `a`.
    pub fn with_clock(a: &BVPath, i: usize) -> Self {
        if i == 0 {
            Self::clock(a.shared_times().clone())
        } else {
            Self::component(a, i - 1)
        }
    }

    /// The measure `dB = g dA` of the indefinite integral `B(t) = ∫_0^t g dA`.
    pub fn indefinite(g: &[f64], mu: &StieltjesMeasure) -> Result<Self> {
        mu.check_integrand(g)?;
        let increments = mu.increments.iter().zip(g).map(|(da, gi)| gi * da).collect();
        Ok(Self { times: mu.times.clone(), increments })
    }

    pub fn times(&self) -> &Arc<[f64]> {
        &self.times
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn total_variation(&self) -> f64 {
        pairwise_sum(&self.increments.iter().map(|d| d.abs()).collect::<Vec<_>>())
    }

    fn check_integrand(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.times.len() {
            return Err(Error::DimensionMismatch { expected: self.times.len(), found: f.len() });
        }
        Ok(())
    }

    fn grid_point(&self, t: f64) -> Result<usize> {
        grid_index(&self.times, t).ok_or(Error::NotGridPoint(t))
    }
}

/// `∫_0^t f dA` for a grid time `t`.
pub fn stieltjes_integral(f: &[f64], mu: &StieltjesMeasure, t: f64) -> Result<f64> {
    stieltjes_integral_between(f, mu, 0.0, t)
}

/// `∫_s^t f dA` for grid times `s <= t`.
pub fn stieltjes_integral_between(f: &[f64], mu: &StieltjesMeasure, s: f64, t: f64) -> Result<f64> {
    mu.check_integrand(f)?;
    let lo = mu.grid_point(s)?;
    let hi = mu.grid_point(t)?;
    if lo > hi {
        return Err(Error::Domain(format!("lower limit {s} exceeds upper limit {t}")));
    }
    let terms: Vec<f64> = (lo..hi).map(|i| f[i] * mu.increments[i]).collect();
    Ok(pairwise_sum(&terms))
}

/// `t ↦ ∫_0^t f dA` at every grid time.
pub fn stieltjes_path(f: &[f64], mu: &StieltjesMeasure) -> Result<Vec<f64>> {
    mu.check_integrand(f)?;
    let terms: Vec<f64> = mu.increments.iter().zip(f).map(|(da, fi)| fi * da).collect();
    Ok(prefix_sums(&terms))
}

/// Sum of absolute grid increments.
pub fn total_variation(values: &[f64]) -> f64 {
    let abs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    pairwise_sum(&abs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociativityResidual {
    /// `max_t |∫_0^t f dB - ∫_0^t f g dA|` with `B = ∫ g dA`.
    pub max_residual: f64,
    pub at_time: f64,
}

/// Compares `∫ f dB` with `∫ f g dA` on every grid time, where `B(t) = ∫_0^t g dA`.
pub fn stieltjes_associativity_check(
    f: &[f64],
    g: &[f64],
    mu: &StieltjesMeasure,
) -> Result<AssociativityResidual> {
    let db = StieltjesMeasure::indefinite(g, mu)?;
    let lhs = stieltjes_path(f, &db)?;
    let fg: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
    let rhs = stieltjes_path(&fg, mu)?;
    let (idx, max_residual) = lhs
        .iter()
        .zip(&rhs)
        .map(|(l, r)| (l - r).abs())
        .enumerate()
        .fold((0, 0.0), |best, (i, r)| if r > best.1 { (i, r) } else { best });
    Ok(AssociativityResidual { max_residual, at_time: mu.times[idx] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::SampledPath;
    use proptest::prelude::*;

    fn grid(n: usize) -> Arc<[f64]> {
        SampledPath::uniform_grid(n, 1.0)
    }

    #[test]
    fn constant_integrand_telescopes() {
        let times = grid(16);
        let a: Vec<f64> = times.iter().map(|t| (3.0 * t).sin()).collect();
        let mu = StieltjesMeasure::from_values(times.clone(), &a).unwrap();
        let ones = vec![1.0; times.len()];
        let got = stieltjes_integral(&ones, &mu, 1.0).unwrap();
        assert!((got - (a[16] - a[0])).abs() < 1e-15);
    }

    #[test]
    fn identity_against_identity() {
        for n in [64usize, 1024] {
            let times = grid(n);
            let f: Vec<f64> = times.to_vec();
            let mu = StieltjesMeasure::clock(times.clone());
            let got = stieltjes_integral(&f, &mu, 1.0).unwrap();
            // Left-endpoint sum of s ds: exactly 1/2 - 1/(2n), within mesh/2 of 1/2.
            let mesh = 1.0 / n as f64;
            assert!((got - 0.5).abs() <= mesh / 2.0 + 1e-15);
            assert!((got - (0.5 - mesh / 2.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_measure() {
        let times = grid(8);
        let mu = StieltjesMeasure::from_values(times.clone(), &vec![2.5; 9]).unwrap();
        let f: Vec<f64> = times.iter().map(|t| t.exp()).collect();
        assert_eq!(stieltjes_integral(&f, &mu, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn upper_limit_must_be_grid_point() {
        let times = grid(4);
        let mu = StieltjesMeasure::clock(times.clone());
        let f = vec![1.0; 5];
        assert!(matches!(stieltjes_integral(&f, &mu, 0.3), Err(Error::NotGridPoint(_))));
        assert!(stieltjes_integral(&f, &mu, 0.25).is_ok());
        assert!(stieltjes_integral(&f[..3], &mu, 0.25).is_err());
    }

    #[test]
    fn total_variation_examples() {
        assert_eq!(total_variation(&[1.0; 10]), 0.0);
        let times = grid(8);
        let id: Vec<f64> = times.to_vec();
        assert_eq!(total_variation(&id), 1.0);
        let v: Vec<f64> = times.iter().map(|t| (t - 0.5).abs()).collect();
        assert_eq!(total_variation(&v), 1.0);
    }

    #[test]
    fn associativity_exact_for_unit_factors() {
        let times = grid(32);
        let a: Vec<f64> = times.iter().map(|t| t * t - t.cos()).collect();
        let mu = StieltjesMeasure::from_values(times.clone(), &a).unwrap();
        let h: Vec<f64> = times.iter().map(|t| (5.0 * t).sin()).collect();
        let ones = vec![1.0; times.len()];
        assert_eq!(stieltjes_associativity_check(&ones, &h, &mu).unwrap().max_residual, 0.0);
        assert_eq!(stieltjes_associativity_check(&h, &ones, &mu).unwrap().max_residual, 0.0);
    }

    #[test]
    fn associativity_residual_shrinks_with_mesh_against_cubic() {
        // f = g = s, A = s: both sides approximate t^3 / 3; the two discretizations
        // agree with the closed form up to a one-cell bias.
        let mut errs = Vec::new();
        for n in [64usize, 256] {
            let times = grid(n);
            let s: Vec<f64> = times.to_vec();
            let mu = StieltjesMeasure::clock(times.clone());
            let db = StieltjesMeasure::indefinite(&s, &mu).unwrap();
            let lhs = stieltjes_integral(&s, &db, 1.0).unwrap();
            errs.push((lhs - 1.0 / 3.0).abs());
            let r = stieltjes_associativity_check(&s, &s, &mu).unwrap();
            assert!(r.max_residual < 1e-14);
        }
        assert!(errs[1] < errs[0] / 3.0);
    }

    proptest! {
        #[test]
        fn linear_chasles_and_bound(
            f in proptest::collection::vec(-5.0f64..5.0, 33),
            g in proptest::collection::vec(-5.0f64..5.0, 33),
            a in proptest::collection::vec(-1.0f64..1.0, 33),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
            cut in 0usize..=32,
        ) {
            let times = grid(32);
            let mu = StieltjesMeasure::from_values(times.clone(), &a).unwrap();
            let combo: Vec<f64> = f.iter().zip(&g).map(|(x, y)| alpha * x + beta * y).collect();
            let lhs = stieltjes_integral(&combo, &mu, 1.0).unwrap();
            let rhs = alpha * stieltjes_integral(&f, &mu, 1.0).unwrap()
                + beta * stieltjes_integral(&g, &mu, 1.0).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);

            let t = times[cut];
            let whole = stieltjes_integral(&f, &mu, 1.0).unwrap();
            let split = stieltjes_integral(&f, &mu, t).unwrap()
                + stieltjes_integral_between(&f, &mu, t, 1.0).unwrap();
            prop_assert!((whole - split).abs() <= 1e-12);

            let sup = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            prop_assert!(whole.abs() <= sup * total_variation(&a) + 1e-12);
        }
    }
}
