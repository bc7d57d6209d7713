//! Numerical toolkit for the complex σ₂ equation `σ₂(χ + ∂∂̄φ) = C(n,2)·e^F`.
//!
//! * [`symfun`]: elementary symmetric functions, Gårding cones, `log σ₂` jets.
//! * [`concavity`]: the concavity matrix of `log σ₂` and its spectral data.
//! * [`perturb`]: derivatives of the top eigenvalue of a real Hessian.
//! * [`geometry`]: grids, frames and finite-difference Hessians on flat tori.
//! * [`solver`]: damped Newton for the σ₂ equation with Γ₂ safeguards.
//! * [`audit`]: the maximum-principle quantities at the maximum of the test function.

pub mod audit;
pub mod concavity;
pub mod error;
pub mod linalg;
pub mod geometry;
pub mod perturb;
pub mod solver;
pub mod symfun;

pub use audit::{AuditLedger, BarrierJet, QhatOutcome};
pub use concavity::{ConcavityMatrix, ConcavitySpectrum, WeylEnvelope};
pub use error::{Error, Result};
pub use symfun::{InequalitySlacks, Sigma2Jet, Spectrum};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use nalgebra;
pub use num_complex::Complex64;
