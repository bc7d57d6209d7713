use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::frame::frame_bracket;
use super::stencil::{gradient, hessian_parts, upper_index};
use super::{FrameField, ScalarField, TorusGrid};
use crate::error::{Error, Result};

/// A Hermitian `n × n` matrix at every grid point, point-major.
#[derive(Debug, Clone)]
pub struct HermitianField {
    pub grid: TorusGrid,
    pub entries: Vec<Complex64>,
}

impl HermitianField {
    pub fn zeros(grid: TorusGrid) -> Self {
        let n = grid.n();
        HermitianField { grid, entries: vec![Complex64::new(0.0, 0.0); grid.len() * n * n] }
    }

    /// `c · I` at every point.
    pub fn scaled_identity(grid: TorusGrid, c: f64) -> Self {
        let mut f = Self::zeros(grid);
        let n = grid.n();
        for block in f.entries.chunks_exact_mut(n * n) {
            for i in 0..n {
                block[i * n + i] = Complex64::new(c, 0.0);
            }
        }
        f
    }

    pub fn block(&self, idx: usize) -> &[Complex64] {
        let nn = self.grid.n() * self.grid.n();
        &self.entries[idx * nn..(idx + 1) * nn]
    }

    pub fn at(&self, idx: usize) -> DMatrix<Complex64> {
        let n = self.grid.n();
        DMatrix::from_row_slice(n, n, self.block(idx))
    }

    /// Largest `|H_ij − conj(H_ji)|` over the grid.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n();
        self.entries
            .par_chunks(n * n)
            .map(|b| {
                let mut m = 0.0f64;
                for i in 0..n {
                    for j in 0..n {
                        m = m.max((b[i * n + j] - b[j * n + i].conj()).norm());
                    }
                }
                m
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Smallest eigenvalue over the grid (for `χ ≥ ε₀ I` checks).
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut lo = f64::INFINITY;
        for idx in 0..self.grid.len() {
            let e = crate::linalg::jacobi_hermitian(&self.at(idx))?;
            lo = lo.min(*e.values.last().unwrap());
        }
        Ok(lo)
    }

    pub fn add(&self, other: &HermitianField) -> Result<HermitianField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("Hermitian fields on different grids".into()));
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Ok(HermitianField { grid: self.grid, entries })
    }
}

/// A real symmetric `2n × 2n` matrix at every grid point, point-major.
#[derive(Debug, Clone)]
pub struct SymmetricField {
    pub grid: TorusGrid,
    pub entries: Vec<f64>,
}

impl SymmetricField {
    pub fn at(&self, idx: usize) -> DMatrix<f64> {
        let d = self.grid.dims();
        DMatrix::from_row_slice(d, d, &self.entries[idx * d * d..(idx + 1) * d * d])
    }
}

fn frame_for<'a>(phi: &ScalarField, frame: &'a FrameField) -> Result<&'a FrameField> {
    if frame.grid() != &phi.grid {
        return Err(Error::GridMismatch(format!("field on {:?}, frame on {:?}", phi.grid, frame.grid())));
    }
    Ok(frame)
}

/// `φ_{ij̄} = e_i ē_j φ − [e_i, ē_j]^{(0,1)} φ`.
pub fn complex_hessian(phi: &ScalarField, frame: &FrameField) -> Result<HermitianField> {
    let frame = frame_for(phi, frame)?;
    let grid = phi.grid;
    let (n, d) = (grid.n(), grid.dims());
    let parts = hessian_parts(&grid, &phi.samples);
    let mut out = HermitianField::zeros(grid);

    if frame.is_constant() {
        // Precompute the nonzero couplings a_i^β conj(a_j^γ) once.
        let mut couplings: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); n * n];
        for i in 0..n {
            for j in 0..n {
                for b in 0..d {
                    for g in 0..d {
                        let c = frame.coeff(0, i, b) * frame.coeff(0, j, g).conj();
                        if c.norm() > 0.0 {
                            couplings[i * n + j].push((upper_index(d, b, g), c));
                        }
                    }
                }
            }
        }
        out.entries.par_chunks_mut(n * n).enumerate().for_each(|(idx, block)| {
            for (slot, list) in block.iter_mut().zip(&couplings) {
                *slot = list.iter().map(|&(k, c)| c * parts[k][idx]).sum();
            }
        });
        return Ok(out);
    }

    let grad = gradient(&grid, &phi.samples);
    // e_i(conj a_j^γ) needs coordinate derivatives of the frame coefficients.
    let coeff_d: Vec<Vec<Vec<Complex64>>> = (0..n)
        .map(|j| {
            (0..d)
                .flat_map(|g| {
                    let comp: Vec<Complex64> = (0..grid.len()).map(|idx| frame.coeff(idx, j, g).conj()).collect();
                    (0..d).map(move |b| (g, b, comp.clone()))
                })
                .map(|(_, b, comp)| super::stencil::d1(&grid, &comp, b))
                .collect()
        })
        .collect();
    let brackets: Vec<Vec<Complex64>> =
        (0..n * n).map(|ij| frame_bracket(frame, ij / n, ij % n)).collect::<Result<_>>()?;
    out.entries.par_chunks_mut(n * n).enumerate().for_each(|(idx, block)| {
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for b in 0..d {
                    let ai = frame.coeff(idx, i, b);
                    for g in 0..d {
                        let aj = frame.coeff(idx, j, g).conj();
                        s += ai * aj * parts[upper_index(d, b, g)][idx];
                        s += ai * coeff_d[j][g * d + b][idx] * grad[g][idx];
                    }
                }
                let w = &brackets[i * n + j][idx * d..(idx + 1) * d];
                for g in 0..d {
                    s -= w[g] * grad[g][idx];
                }
                block[i * n + j] = s;
            }
        }
    });
    Ok(out)
}

/// `∇²φ` by fourth-order differences; symmetric by construction.
pub fn real_hessian(phi: &ScalarField) -> SymmetricField {
    let grid = phi.grid;
    let d = grid.dims();
    let parts = hessian_parts(&grid, &phi.samples);
    let mut entries = vec![0.0; grid.len() * d * d];
    entries.par_chunks_mut(d * d).enumerate().for_each(|(idx, block)| {
        for a in 0..d {
            for b in 0..d {
                block[a * d + b] = parts[upper_index(d, a, b)][idx];
            }
        }
    });
    SymmetricField { grid, entries }
}

/// `|∂φ|² = Σ_k |e_k φ|²`.
pub fn grad_norm_sq(phi: &ScalarField, frame: &FrameField) -> Result<ScalarField> {
    let frame = frame_for(phi, frame)?;
    let grid = phi.grid;
    let grad = gradient(&grid, &phi.samples);
    let samples = (0..grid.len())
        .into_par_iter()
        .map(|idx| (0..grid.n()).map(|k| frame.apply(idx, k, &grad).norm_sqr()).sum())
        .collect();
    Ok(ScalarField { grid, samples })
}
