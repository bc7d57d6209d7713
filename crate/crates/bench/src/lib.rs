//! Fixtures shared by the criterion benches.

use sigma2_core::geometry::ScalarField;
use sigma2_core::solver::{manufactured_case, SolverConfig};
use sigma2_core::symfun::sample_gamma_k;
use sigma2_core::Spectrum;

/// Fixed-seed Γ₂ spectra so every bench sees the same inputs.
pub fn spectra(n: usize, count: usize) -> Vec<Spectrum> {
    sample_gamma_k(n, 2, count, 7).expect("valid sampling parameters")
}

/// The exact manufactured solution and its configuration on a `res`-point grid.
pub fn manufactured(n: usize, res: usize) -> (ScalarField, SolverConfig) {
    manufactured_case(n, res, 0.5).expect("valid manufactured case")
}
