//! Right-hand sides `F(z, ∂φ, φ)` and their partial derivatives.

use std::path::PathBuf;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::stencil::gradient;
use crate::geometry::{complex_hessian, read_binary, FrameField, ScalarField, TorusGrid};

/// A scalar input given either as a constant or as a binary field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSource {
    Constant(f64),
    File { path: PathBuf },
}

impl FieldSource {
    pub fn resolve(&self, grid: TorusGrid) -> Result<ScalarField> {
        match self {
            FieldSource::Constant(c) => Ok(ScalarField { grid, samples: vec![*c; grid.len()] }),
            FieldSource::File { path } => {
                let f = read_binary(path)?;
                f.check_grid(&grid)?;
                Ok(f)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RhsModel {
    /// `F ≡ value`.
    Constant { value: f64 },
    /// The right-hand side for which `δ cos x₀` is the exact solution when
    /// `χ = I`; see [`manufactured_f`].
    Manufactured { delta: f64 },
    /// The Fu–Yau right-hand side with slope `alpha`.
    FuYau { alpha: f64, f: FieldSource, mu: FieldSource },
}

impl RhsModel {
    pub fn depends_on_phi(&self) -> bool {
        matches!(self, RhsModel::FuYau { .. })
    }
}

/// `F` at `δ cos x₀` for `χ = I`: there `g̃ = diag(η₁, 1, …, 1)` with
/// `η₁ = 1 − (δ/2)cos x₀`, so `F = log(((n−1)η₁ + C(n−1,2)) / C(n,2))`.
pub fn manufactured_f(n: usize, delta: f64, x0: f64) -> f64 {
    let eta1 = 1.0 - 0.5 * delta * x0.cos();
    let m = (n - 1) as f64;
    ((m * eta1 + m * (m - 1.0) / 2.0) / binomial2(n)).ln()
}

/// Largest admissible `δ`: `η₁` must stay above `−(n−2)/2` (and above 0 for `n = 2`).
pub fn manufactured_delta_max(n: usize) -> f64 {
    n as f64
}

pub(crate) fn binomial2(n: usize) -> f64 {
    (n * (n - 1) / 2) as f64
}

pub(crate) fn check_manufactured_delta(n: usize, delta: f64) -> Result<()> {
    let hi = manufactured_delta_max(n);
    if !(delta > 0.0 && delta < hi) {
        return Err(Error::Domain(format!("manufactured δ = {delta} must lie in (0, {hi}) for n = {n}")));
    }
    Ok(())
}

/// `F`, `∂F/∂r` and `∂F/∂p_i` sampled on the grid (`dp` is point-major, `n` per point).
pub(crate) struct RhsEval {
    pub value: Vec<f64>,
    pub dr: Option<Vec<f64>>,
    pub dp: Option<Vec<Complex64>>,
}

/// Precomputed, grid-resolved form of an [`RhsModel`], with `F` multiplied by `scale`.
pub(crate) enum Rhs {
    Fixed(Vec<f64>),
    FuYau(FuYauData),
}

pub(crate) struct FuYauData {
    alpha: f64,
    f: Vec<f64>,
    mu: Vec<f64>,
    /// `e_i f`, point-major.
    df: Vec<Complex64>,
    /// `Δf = Σ f_{iī}`.
    lap_f: Vec<f64>,
    scale: f64,
}

impl Rhs {
    pub fn new(model: &RhsModel, grid: TorusGrid, frame: &FrameField, scale: f64) -> Result<Rhs> {
        match model {
            RhsModel::Constant { value } => Ok(Rhs::Fixed(vec![scale * value; grid.len()])),
            RhsModel::Manufactured { delta } => {
                check_manufactured_delta(grid.n(), *delta)?;
                let n = grid.n();
                let f = ScalarField::from_fn(grid, |x| scale * manufactured_f(n, *delta, x[0]));
                Ok(Rhs::Fixed(f.samples))
            }
            RhsModel::FuYau { alpha, f, mu } => {
                let f = f.resolve(grid)?;
                let mu = mu.resolve(grid)?;
                Ok(Rhs::FuYau(FuYauData::new(*alpha, &f, &mu, frame, scale)?))
            }
        }
    }

    pub fn depends_on_phi(&self) -> bool {
        matches!(self, Rhs::FuYau(_))
    }

    /// Evaluates at `φ` with coordinate gradient `grad` in the given frame.
    pub fn eval(&self, phi: &ScalarField, grad: &[Vec<f64>], frame: &FrameField) -> Result<RhsEval> {
        match self {
            Rhs::Fixed(v) => Ok(RhsEval { value: v.clone(), dr: None, dp: None }),
            Rhs::FuYau(d) => d.eval(phi, grad, frame),
        }
    }
}

impl FuYauData {
    fn new(alpha: f64, f: &ScalarField, mu: &ScalarField, frame: &FrameField, scale: f64) -> Result<Self> {
        let grid = f.grid;
        mu.check_grid(&grid)?;
        let n = grid.n();
        let g = gradient(&grid, &f.samples);
        let df = (0..grid.len()).flat_map(|idx| (0..n).map(move |i| (idx, i))).map(|(idx, i)| frame.apply(idx, i, &g)).collect();
        let hess = complex_hessian(f, frame)?;
        let lap_f = (0..grid.len()).map(|idx| (0..n).map(|i| hess.block(idx)[i * n + i].re).sum()).collect();
        Ok(FuYauData { alpha, f: f.samples.clone(), mu: mu.samples.clone(), df, lap_f, scale })
    }

    fn eval(&self, phi: &ScalarField, grad: &[Vec<f64>], frame: &FrameField) -> Result<RhsEval> {
        let grid = phi.grid;
        let n = grid.n();
        let a = self.alpha;
        let nm1 = (n - 1) as f64;
        let per_point: Vec<(f64, f64, f64, Vec<Complex64>)> = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let r = phi.samples[idx];
                let (f, mu, lap) = (self.f[idx], self.mu[idx], self.lap_f[idx]);
                let p: Vec<Complex64> = (0..n).map(|i| frame.apply(idx, i, grad)).collect();
                let df = &self.df[idx * n..(idx + 1) * n];
                let pp: f64 = p.iter().map(|z| z.norm_sqr()).sum();
                let cross: f64 = df.iter().zip(&p).map(|(fi, pi)| (fi * pi.conj()).re).sum();
                let (ep, em) = (r.exp(), (-r).exp());
                let mix = lap - 2.0 * cross;
                let e = ep * ep - 4.0 * a * ep * pp + 4.0 * a * f * em * pp + 2.0 * f + em * em * f * f
                    - 4.0 * a * mu / nm1
                    + 4.0 * a * em * mix;
                let e_r = 2.0 * ep * ep - 4.0 * a * ep * pp - 4.0 * a * f * em * pp - 2.0 * em * em * f * f - 4.0 * a * em * mix;
                let dp = (0..n)
                    .map(|i| (4.0 * a * (f * em - ep) * p[i].conj() - 4.0 * a * em * df[i].conj()) / e * self.scale)
                    .collect();
                (e, e.ln() * self.scale, e_r / e * self.scale, dp)
            })
            .collect();
        if let Some((index, value)) = per_point
            .iter()
            .enumerate()
            .map(|(i, t)| (i, t.0))
            .filter(|(_, e)| !(*e > 0.0))
            .min_by(|x, y| x.1.total_cmp(&y.1))
        {
            return Err(Error::Admissibility { index, value });
        }
        let mut value = Vec::with_capacity(grid.len());
        let mut dr = Vec::with_capacity(grid.len());
        let mut dp = Vec::with_capacity(grid.len() * n);
        for (_, v, r, p) in per_point {
            value.push(v);
            dr.push(r);
            dp.extend(p);
        }
        Ok(RhsEval { value, dr: Some(dr), dp: Some(dp) })
    }
}

/// The Fu–Yau right-hand side `F` as a field.
pub fn fu_yau_rhs(alpha: f64, f: &ScalarField, mu: &ScalarField, phi: &ScalarField, frame: &FrameField) -> Result<ScalarField> {
    f.check_grid(&phi.grid)?;
    if frame.grid() != &phi.grid {
        return Err(Error::GridMismatch("frame and φ on different grids".into()));
    }
    let data = FuYauData::new(alpha, f, mu, frame, 1.0)?;
    let grad = gradient(&phi.grid, &phi.samples);
    let e = data.eval(phi, &grad, frame)?;
    Ok(ScalarField { grid: phi.grid, samples: e.value })
}
