//! Pathwise integration against paths with finite quadratic variation.
//!
//! The crate computes dyadic quadratic variations, pathwise Itô integrals of
//! functional integrands `ξ = ∇_X F`, the terms of the functional
//! change-of-variable formula, and associativity checks for such integrals.

pub mod error;
pub mod experiment;
pub mod functionals;
pub mod ito;
pub mod pathgen;
pub mod paths;
pub mod qv;
pub mod reduce;
pub mod stieltjes;

pub use error::{Error, Result};
pub use functionals::{DynFunctional, Functional};
pub use ito::{AdmissibleIntegrand, ItoOptions, SumMode};
pub use pathgen::{generate, GeneratorKind, GeneratorSpec};
pub use paths::{BVPath, Interpolation, Path, SampledPath};
