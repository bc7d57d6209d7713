//! Pointwise state of `g̃ = χ + ∂∂̄φ` and the linearized operator in real
//! coefficient form `Σ c^{βγ}∂_β∂_γ + Σ b^β∂_β + c⁰`.

use num_complex::Complex64;
use rayon::prelude::*;

use super::rhs::{binomial2, Rhs, RhsEval};
use crate::error::{Error, Result};
use crate::geometry::stencil::{center_weight, gradient, PointStencil};
use crate::geometry::{complex_hessian, pairwise_sum, FrameField, HermitianField, ScalarField, TorusGrid};

/// Coefficients below this fraction of the largest one are dropped.
const NEGLIGIBLE_REL: f64 = 1e-15;

pub(crate) struct Evaluated {
    pub gtilde: HermitianField,
    pub sigma1: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub rhs: RhsEval,
    pub residual: Vec<f64>,
}

impl Evaluated {
    pub fn residual_linf(&self) -> f64 {
        self.residual.iter().fold(0.0f64, |m, r| m.max(r.abs()))
    }

    pub fn min_sigma1(&self) -> f64 {
        self.sigma1.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_sigma2(&self) -> f64 {
        self.sigma2.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `σ₁` and `σ₂` of the eigenvalues of a Hermitian block, from the trace and the
/// principal 2×2 minors.
pub(crate) fn sigma12(block: &[Complex64], n: usize) -> (f64, f64) {
    let s1: f64 = (0..n).map(|i| block[i * n + i].re).sum();
    let mut s2 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s2 += block[i * n + i].re * block[j * n + j].re - block[i * n + j].norm_sqr();
        }
    }
    (s1, s2)
}

pub(crate) fn evaluate(phi: &ScalarField, chi: &HermitianField, frame: &FrameField, rhs: &Rhs) -> Result<Evaluated> {
    let grid = phi.grid;
    let n = grid.n();
    let gtilde = complex_hessian(phi, frame)?.add(chi)?;
    let (sigma1, sigma2): (Vec<f64>, Vec<f64>) = gtilde.entries.par_chunks(n * n).map(|b| sigma12(b, n)).unzip();
    check_cone(&sigma1, &sigma2)?;
    let grad = gradient(&grid, &phi.samples);
    let rhs = rhs.eval(phi, &grad, frame)?;
    let log_c = binomial2(n).ln();
    let residual = sigma2.par_iter().zip(&rhs.value).map(|(s2, f)| s2.ln() - log_c - f).collect();
    Ok(Evaluated { gtilde, sigma1, sigma2, rhs, residual })
}

fn check_cone(sigma1: &[f64], sigma2: &[f64]) -> Result<()> {
    let bad = (0..sigma1.len())
        .filter(|&i| !(sigma1[i] > 0.0 && sigma2[i] > 0.0))
        .min_by(|&a, &b| sigma2[a].min(sigma1[a]).total_cmp(&sigma2[b].min(sigma1[b])));
    match bad {
        Some(index) => Err(Error::FieldConeViolation { index, sigma1: sigma1[index], sigma2: sigma2[index] }),
        None => Ok(()),
    }
}

pub(crate) struct Linearization {
    grid: TorusGrid,
    stencil: PointStencil,
    /// `(β, γ, c^{βγ})` with `β ≤ γ`; the `β < γ` entries already carry both orders.
    second: Vec<(usize, usize, Vec<f64>)>,
    first: Vec<(usize, Vec<f64>)>,
    zero: Option<Vec<f64>>,
    /// Subtracts `shift · mean(u)`, which removes the constant kernel.
    shift: f64,
}

impl Linearization {
    /// Requires a constant frame.
    pub fn new(ev: &Evaluated, frame: &FrameField, shift: f64) -> Linearization {
        let grid = ev.gtilde.grid;
        let (n, d) = (grid.n(), grid.dims());
        let a = |i: usize, b: usize| frame.coeff(0, i, b);
        // w[i][j][β][γ] = a_j^β conj(a_i^γ), constant over the grid.
        let mut weights = vec![Complex64::new(0.0, 0.0); n * n * d * d];
        for i in 0..n {
            for j in 0..n {
                for b in 0..d {
                    for g in 0..d {
                        weights[((i * n + j) * d + b) * d + g] = a(j, b) * a(i, g).conj();
                    }
                }
            }
        }
        let mut second = Vec::new();
        for b in 0..d {
            for g in b..d {
                let c: Vec<f64> = (0..grid.len())
                    .into_par_iter()
                    .map(|idx| {
                        let blk = ev.gtilde.block(idx);
                        let s1 = ev.sigma1[idx];
                        let mut acc = Complex64::new(0.0, 0.0);
                        for i in 0..n {
                            for j in 0..n {
                                let bij = if i == j { s1 - blk[i * n + j] } else { -blk[i * n + j] };
                                let w = weights[((i * n + j) * d + b) * d + g]
                                    + if b != g { weights[((i * n + j) * d + g) * d + b] } else { Complex64::new(0.0, 0.0) };
                                acc += bij * w;
                            }
                        }
                        acc.re / ev.sigma2[idx]
                    })
                    .collect();
                second.push((b, g, c));
            }
        }
        let mut first = Vec::new();
        if let Some(dp) = &ev.rhs.dp {
            for b in 0..d {
                let c: Vec<f64> = (0..grid.len())
                    .into_par_iter()
                    .map(|idx| -2.0 * (0..n).map(|i| (dp[idx * n + i] * a(i, b)).re).sum::<f64>())
                    .collect();
                first.push((b, c));
            }
        }
        let zero = ev.rhs.dr.as_ref().map(|dr| dr.iter().map(|v| -v).collect::<Vec<f64>>());

        let scale = second
            .iter()
            .map(|(_, _, c)| c)
            .chain(first.iter().map(|(_, c)| c))
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let keep = |c: &Vec<f64>| c.iter().any(|v| v.abs() > NEGLIGIBLE_REL * scale);
        second.retain(|(_, _, c)| keep(c));
        first.retain(|(_, c)| keep(c));
        Linearization { grid, stencil: PointStencil::new(&grid), second, first, zero, shift }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mean_term = if self.shift != 0.0 { self.shift * pairwise_sum(u) / u.len() as f64 } else { 0.0 };
        let ps = &self.stencil;
        (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                for (b, g, c) in &self.second {
                    let d = if b == g { ps.d2(u, i, *b) } else { ps.d11(u, i, *b, *g) };
                    acc += c[i] * d;
                }
                for (b, c) in &self.first {
                    acc += c[i] * ps.d1(u, i, *b);
                }
                if let Some(z) = &self.zero {
                    acc += z[i] * u[i];
                }
                acc - mean_term
            })
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let len = self.grid.len();
        (0..len)
            .map(|i| {
                let mut acc = -self.shift / len as f64;
                for (b, g, c) in &self.second {
                    acc += c[i] * center_weight(&self.grid, *b, *g);
                }
                if let Some(z) = &self.zero {
                    acc += z[i];
                }
                acc
            })
            .collect()
    }

    #[cfg(test)]
    pub fn active_terms(&self) -> (usize, usize, bool) {
        (self.second.len(), self.first.len(), self.zero.is_some())
    }
}
