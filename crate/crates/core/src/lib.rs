//! Numerical laboratory for branching random walks in time-inhomogeneous
//! environments: Airy-based constants, the optimal speed profile, the
//! boundary ODEs for the consistent maximal displacement, a Feynman–Kac PDE
//! oracle and a Monte Carlo engine.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod airy;
pub mod environment;
pub mod error;
pub mod functional;
pub mod ode;
pub mod optimal_path;
pub mod pde;
pub mod quad;
pub mod simulate;

pub use error::{Error, Result};

/// α₁, the largest zero of Ai.
pub const AIRY_ALPHA1: f64 = -2.338_107_410_459_767;

/// α₁ / 2^{1/3}, the Takács constant.
pub fn takacs_constant() -> f64 {
    AIRY_ALPHA1 / 2f64.cbrt()
}
