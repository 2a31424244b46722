//! Numerical laboratory for the viscous Hamilton-Jacobi-Bellman equation
//! `d_t phi - Laplacian phi + 1/2 <A grad phi, grad phi> = 0` on a Hilbert
//! space, studied through its Galerkin truncations.
//!
//! * [`spectral`]: the operator `A` as an eigenvalue sequence.
//! * [`quadratic`]: exact Riccati solutions for diagonal quadratic data.
//! * [`deterministic`]: the first-order problem via the Lax-Oleinik formula.
//! * [`viscous`]: grid solver, Cole-Hopf oracle and the queryable [`viscous::SolutionField`].
//! * [`verify`]: a priori estimates, sandwich bounds and residual checks.
//! * [`storage`]: the circle storage market and its Monte-Carlo diagnostics.
//! * [`galerkin`]: convergence tables across truncation levels.

// `!(x > 0.0)` is the idiom used throughout to reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod deterministic;
pub mod error;
pub mod galerkin;
pub mod initial;
pub mod numeric;
pub mod quadratic;
pub mod spectral;
pub mod storage;
pub mod verify;
pub mod viscous;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use spectral::{EigenSpectrum, SpectrumDescriptor, TruncatedPoint};
