//! Sampled regularity probes. They can flag violations, never prove regularity.

use super::Functional;
use crate::paths::{Bumped, Path};

/// Probe times and perturbation sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSchedule {
    /// Times at which to probe (need not be grid times).
    pub times: Vec<f64>,
    /// Decreasing step sizes `h`, used both as time lags and perturbation sizes.
    pub steps: Vec<f64>,
    /// Radius of the tube around `X` for the boundedness probe.
    pub tube_radius: f64,
    /// A modulus above this at the smallest step is a candidate violation.
    pub tolerance: f64,
}

impl ProbeSchedule {
    /// Nine equally spaced interior times of `[0, horizon]`.
    pub fn uniform(horizon: f64) -> Self {
        Self {
            times: (1..10).map(|k| horizon * k as f64 / 10.0).collect(),
            ..Self::default()
        }
    }
}

impl Default for ProbeSchedule {
    fn default() -> Self {
        Self { times: Vec::new(), steps: vec![1e-4, 1e-6, 1e-8, 1e-10], tube_radius: 1e-2, tolerance: 1e-6 }
    }
}

/// Moduli `ω(h)` at one probe time.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub t: f64,
    /// `(h, ω(h))` for each scheduled step.
    pub moduli: Vec<(f64, f64)>,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    /// `ω(h) = max |F(t, X, A) - F(t - h, Y, A)|` over `Y ∈ {X, X + h}`.
    pub left_continuity: Vec<ProbeResult>,
    /// `ω(h) = max |F(t, X, A) - F(t, X ± h, A)|` with constant shifts of every coordinate.
    pub fixed_time_continuity: Vec<ProbeResult>,
    /// Largest `|F|` found on the sampled tube; finite means no violation.
    pub bound: f64,
    pub bounded: bool,
}

impl RegularityReport {
    pub fn passed(&self) -> bool {
        self.bounded
            && self.left_continuity.iter().all(|p| !p.violation)
            && self.fixed_time_continuity.iter().all(|p| !p.violation)
    }
}

// A modulus that does not shrink with the step is a violation.
fn flag(moduli: &[(f64, f64)], tol: f64) -> bool {
    let (Some(&(_, first)), Some(&(_, last))) = (moduli.first(), moduli.last()) else {
        return false;
    };
    !last.is_finite() || (last > tol && last > 0.5 * first)
}

fn shift_all(x: &dyn Path, v: f64) -> Bumped<'_> {
    Bumped::new(x, 0.0, vec![v; x.dim()])
}

/// Probes left-continuity, continuity at fixed times and boundedness of `f` around `(X, A)`.
pub fn probe_regularity(
    f: &dyn Functional,
    x: &dyn Path,
    a: &dyn Path,
    schedule: &ProbeSchedule,
) -> RegularityReport {
    let mut left_continuity = Vec::new();
    let mut fixed_time_continuity = Vec::new();
    for &t in &schedule.times {
        let here = f.eval(t, x, a);
        let mut left = Vec::new();
        let mut fixed = Vec::new();
        for &h in &schedule.steps {
            if t - h >= 0.0 {
                let same = (here - f.eval(t - h, x, a)).abs();
                let shifted = (here - f.eval(t - h, &shift_all(x, h), a)).abs();
                left.push((h, same.max(shifted)));
            }
            let up = (here - f.eval(t, &shift_all(x, h), a)).abs();
            let down = (here - f.eval(t, &shift_all(x, -h), a)).abs();
            fixed.push((h, up.max(down)));
        }
        left_continuity.push(ProbeResult { t, violation: flag(&left, schedule.tolerance), moduli: left });
        fixed_time_continuity.push(ProbeResult {
            t,
            violation: flag(&fixed, schedule.tolerance),
            moduli: fixed,
        });
    }

    let eta = schedule.tube_radius;
    let mut bound: f64 = 0.0;
    let times: Vec<f64> = if schedule.times.is_empty() { x.times().to_vec() } else { schedule.times.clone() };
    for &t in &times {
        for &s in &[0.0, eta, -eta] {
            let shifted = shift_all(x, s);
            bound = bound.max(f.eval(t, &shifted, a).abs());
            for k in 0..x.dim() {
                let bumped = Bumped::coordinate(&shifted, t, k, eta);
                bound = bound.max(f.eval(t, &bumped, a).abs());
            }
        }
    }
    RegularityReport { left_continuity, fixed_time_continuity, bounded: bound.is_finite(), bound }
}
