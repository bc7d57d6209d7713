use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{stencil, TorusGrid};
use crate::error::{Error, Result};

const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
enum Coeffs {
    /// `n × 2n`: row `i` holds `a_i^β`.
    Constant(DMatrix<Complex64>),
    /// Point-major storage of the same rows, `len · n · 2n` entries.
    Sampled(Vec<Complex64>),
}

/// A unitary (1,0)-frame `e_i = Σ_β a_i^β ∂_β` over a torus grid.
#[derive(Debug, Clone)]
pub struct FrameField {
    grid: TorusGrid,
    coeffs: Coeffs,
}

fn check_unitary(m: &DMatrix<Complex64>) -> Result<()> {
    let n = m.nrows();
    let gram = m * m.adjoint();
    let dev = (gram - DMatrix::<Complex64>::identity(n, n)).iter().fold(0.0f64, |a, z| a.max(z.norm()));
    if dev > UNITARY_TOL {
        return Err(Error::InvalidArgument(format!("frame is not unitary (deviation {dev:e})")));
    }
    Ok(())
}

impl FrameField {
    /// `e_i = (∂_{2i} − √−1 ∂_{2i+1})/√2`.
    pub fn standard(grid: TorusGrid) -> Self {
        let n = grid.n();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = DMatrix::<Complex64>::zeros(n, 2 * n);
        for i in 0..n {
            m[(i, 2 * i)] = Complex64::new(r, 0.0);
            m[(i, 2 * i + 1)] = Complex64::new(0.0, -r);
        }
        FrameField { grid, coeffs: Coeffs::Constant(m) }
    }

    pub fn constant(grid: TorusGrid, coeffs: DMatrix<Complex64>) -> Result<Self> {
        if coeffs.shape() != (grid.n(), grid.dims()) {
            return Err(Error::GridMismatch(format!(
                "frame coefficients are {:?}, expected {:?}",
                coeffs.shape(),
                (grid.n(), grid.dims())
            )));
        }
        check_unitary(&coeffs)?;
        Ok(FrameField { grid, coeffs: Coeffs::Constant(coeffs) })
    }

    /// Samples `coeffs(x)` (an `n × 2n` matrix) at every grid point.
    pub fn from_fn<F>(grid: TorusGrid, coeffs: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> DMatrix<Complex64> + Sync,
    {
        let (n, d) = (grid.n(), grid.dims());
        let blocks: Vec<DMatrix<Complex64>> = (0..grid.len()).into_par_iter().map(|i| coeffs(&grid.coords(i))).collect();
        let mut flat = Vec::with_capacity(grid.len() * n * d);
        for b in &blocks {
            if b.shape() != (n, d) {
                return Err(Error::GridMismatch("frame block has the wrong shape".into()));
            }
            check_unitary(b)?;
            for i in 0..n {
                for beta in 0..d {
                    flat.push(b[(i, beta)]);
                }
            }
        }
        Ok(FrameField { grid, coeffs: Coeffs::Sampled(flat) })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.coeffs, Coeffs::Constant(_))
    }

    /// `a_i^β` at grid point `idx`.
    #[inline]
    pub fn coeff(&self, idx: usize, i: usize, beta: usize) -> Complex64 {
        match &self.coeffs {
            Coeffs::Constant(m) => m[(i, beta)],
            Coeffs::Sampled(v) => {
                let d = self.grid.dims();
                v[(idx * self.grid.n() + i) * d + beta]
            }
        }
    }

    /// `e_i(f)` at `idx` from the coordinate gradient `grad[β][idx]`.
    #[inline]
    pub fn apply(&self, idx: usize, i: usize, grad: &[Vec<f64>]) -> Complex64 {
        (0..self.grid.dims()).map(|b| self.coeff(idx, i, b) * grad[b][idx]).sum()
    }

    /// The field `β ↦ a_i^β` (conjugated when `conj`), point-major with `2n` components.
    pub fn vector_field(&self, i: usize, conj: bool) -> Vec<Complex64> {
        let d = self.grid.dims();
        let mut out = Vec::with_capacity(self.grid.len() * d);
        for idx in 0..self.grid.len() {
            for b in 0..d {
                let c = self.coeff(idx, i, b);
                out.push(if conj { c.conj() } else { c });
            }
        }
        out
    }
}

/// Lie bracket `[X, Y]^γ = X(Y^γ) − Y(X^γ)` of two complex vector fields
/// stored point-major with `2n` components.
pub fn lie_bracket(grid: &TorusGrid, x: &[Complex64], y: &[Complex64]) -> Vec<Complex64> {
    let d = grid.dims();
    let len = grid.len();
    let component = |v: &[Complex64], g: usize| -> Vec<Complex64> { (0..len).map(|i| v[i * d + g]).collect() };
    let mut out = vec![Complex64::new(0.0, 0.0); len * d];
    for g in 0..d {
        let yg = component(y, g);
        let xg = component(x, g);
        for b in 0..d {
            let dyg = stencil::d1(grid, &yg, b);
            let dxg = stencil::d1(grid, &xg, b);
            for i in 0..len {
                out[i * d + g] += x[i * d + b] * dyg[i] - y[i * d + b] * dxg[i];
            }
        }
    }
    out
}

/// Projection `w ↦ ½(w + √−1 J w)` onto the span of the `ē_k`, with
/// `J∂_{2k} = ∂_{2k+1}` and `J∂_{2k+1} = −∂_{2k}`.
pub fn project_01(w: &mut [Complex64]) {
    let i = Complex64::new(0.0, 1.0);
    for pair in w.chunks_exact_mut(2) {
        let (a, b) = (pair[0], pair[1]);
        // J w has components (−b, a) on (∂_{2k}, ∂_{2k+1}).
        pair[0] = 0.5 * (a - i * b);
        pair[1] = 0.5 * (b + i * a);
    }
}

/// `[e_i, ē_j]^{(0,1)}` as a point-major complex vector field.
pub fn frame_bracket(frame: &FrameField, i: usize, j: usize) -> Result<Vec<Complex64>> {
    let grid = frame.grid;
    let n = grid.n();
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!("frame index out of range 0..{n}")));
    }
    if frame.is_constant() {
        return Ok(vec![Complex64::new(0.0, 0.0); grid.len() * grid.dims()]);
    }
    let mut w = lie_bracket(&grid, &frame.vector_field(i, false), &frame.vector_field(j, true));
    project_01(&mut w);
    Ok(w)
}
