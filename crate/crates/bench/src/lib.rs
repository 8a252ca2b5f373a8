//! Shared fixtures for the kernel benchmarks.

use std::sync::Arc;

use pathwise_core::functionals::Cylinder;
use pathwise_core::{generate, AdmissibleIntegrand, GeneratorSpec, Path, SampledPath};

/// Seeded Brownian-type path with `n` increments.
pub fn brownian(n: usize, dim: usize) -> SampledPath {
    generate(&GeneratorSpec::brownian(42, n).with_dim(dim)).expect("valid generator spec")
}

/// `ξ = ∇ exp(X_1)`, an integrand with analytic derivatives.
pub fn exp_integrand(x: &SampledPath) -> AdmissibleIntegrand {
    let f = Arc::new(Cylinder::exp(x.dim(), 0, 0));
    AdmissibleIntegrand::without_bv(f, x.shared_times().clone()).expect("matching dimensions")
}
