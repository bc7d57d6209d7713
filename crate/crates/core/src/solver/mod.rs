//! Damped Newton for `σ₂(χ + ∂∂̄φ) = C(n,2)·e^{F(z,∂φ,φ)}` on the flat torus
//! with the standard frame.
//!
//! The residual is `log σ₂(g̃) − log C(n,2) − F` with `g̃ = χ + ∂∂̄φ`, and its
//! derivative is `L(u) = G^{ij̄}u_{ij̄} − F_r u − 2Re(F_{p_i} e_i u)` with
//! `G^{ij̄} = (σ₁δ_ij − g̃_{ij̄})/σ₂`. Every accepted iterate keeps
//! `σ₂(g̃) ≥ cone_margin` and `σ₁(g̃) > 0` at all grid points.
//!
//! When `F` does not depend on `φ` the equation only sees `φ` up to a
//! constant. The Newton systems then use `L(u) − mean(u)`, which has no kernel,
//! and the gauge from the configuration is applied after every step. The
//! continuity family `t·F` is only solvable after adding a constant `b_t` to
//! the right-hand side; [`continuation_solve`] treats `b_t` as an unknown, and
//! the `−mean(u)` column is exactly its Newton update.

mod krylov;
mod operator;
mod rhs;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use krylov::{LinearSettings, LinearSolveInfo};
pub use rhs::{fu_yau_rhs, manufactured_delta_max, manufactured_f, FieldSource, RhsModel};

use crate::error::{Error, Result};
use crate::geometry::stencil::hessian_parts;
use crate::geometry::{FrameField, HermitianField, ScalarField, TorusGrid};
use operator::{evaluate, Evaluated, Linearization};
use rhs::Rhs;

/// Weight of the `mean(u)` term that removes the constant kernel.
const CONSTANT_MODE_SHIFT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChiSpec {
    Identity,
    Scaled { value: f64 },
}

impl ChiSpec {
    /// The `ε₀` with `χ ≥ ε₀ I`.
    pub fn eps0(&self) -> f64 {
        match self {
            ChiSpec::Identity => 1.0,
            ChiSpec::Scaled { value } => *value,
        }
    }

    pub fn field(&self, grid: TorusGrid) -> HermitianField {
        HermitianField::scaled_identity(grid, self.eps0())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Damping {
    pub backtrack: f64,
    pub armijo: f64,
    pub min_step: f64,
}

impl Default for Damping {
    fn default() -> Self {
        Damping { backtrack: 0.5, armijo: 1e-4, min_step: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    SupZero,
    MeanZero,
}

impl Gauge {
    pub fn apply(&self, phi: &mut ScalarField) {
        let c = match self {
            Gauge::SupZero => phi.sup(),
            Gauge::MeanZero => phi.mean(),
        };
        phi.samples.iter_mut().for_each(|v| *v -= c);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n: usize,
    pub res: usize,
    pub rhs: RhsModel,
    #[serde(default = "default_chi")]
    pub chi: ChiSpec,
    #[serde(default = "default_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub damping: Damping,
    #[serde(default = "default_margin")]
    pub cone_margin: f64,
    #[serde(default = "default_gauge")]
    pub gauge: Gauge,
    #[serde(default)]
    pub linear: LinearSettings,
}

fn default_chi() -> ChiSpec {
    ChiSpec::Identity
}
fn default_tol() -> f64 {
    1e-9
}
fn default_max_iters() -> usize {
    40
}
fn default_margin() -> f64 {
    1e-3
}
fn default_gauge() -> Gauge {
    Gauge::MeanZero
}

impl SolverConfig {
    pub fn new(n: usize, res: usize, rhs: RhsModel) -> Self {
        SolverConfig {
            n,
            res,
            rhs,
            chi: default_chi(),
            newton_tol: default_tol(),
            max_iters: default_max_iters(),
            damping: Damping::default(),
            cone_margin: default_margin(),
            gauge: default_gauge(),
            linear: LinearSettings::default(),
        }
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.n, self.res)
    }

    pub fn validate(&self) -> Result<TorusGrid> {
        let grid = self.grid()?;
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if !(self.chi.eps0() > 0.0) {
            return bad("χ must be bounded below by a positive multiple of the identity");
        }
        if !(self.newton_tol > 0.0) || !(self.cone_margin > 0.0) {
            return bad("newton_tol and cone_margin must be positive");
        }
        let d = &self.damping;
        if !(d.backtrack > 0.0 && d.backtrack < 1.0) || !(d.armijo >= 0.0 && d.armijo < 1.0) || !(d.min_step > 0.0) {
            return bad("damping needs 0 < backtrack < 1, 0 ≤ armijo < 1 and min_step > 0");
        }
        if self.linear.max_iters == 0 || !(self.linear.rel_tol > 0.0) {
            return bad("linear solver needs max_iters > 0 and rel_tol > 0");
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIters,
    LineSearchFailed,
}

/// One accepted Newton step (row 0 is the initial iterate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub residual_linf: f64,
    pub step: f64,
    pub min_sigma2: f64,
    /// `None` on row 0.
    pub linear: Option<LinearSolveInfo>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    pub converged: bool,
    /// Passes through the Newton loop, including the final convergence check.
    pub iters: usize,
    pub residual_linf: f64,
    #[serde(skip)]
    pub phi: ScalarField,
    pub min_sigma1: f64,
    pub min_sigma2: f64,
    /// `sup |∇²φ|` (Frobenius norm of the real Hessian).
    pub c2_sup: f64,
    pub stop_reason: StopReason,
    pub gauge_applied: bool,
    /// The constant `b` added to `F` (always 0 for [`newton_solve`]).
    pub rhs_shift: f64,
    /// Newton steps whose linear solve stopped above its tolerance.
    pub linear_stalls: usize,
    pub history: Vec<HistoryRow>,
}

/// CSV with header `iter,residual_linf,step,min_sigma2`.
pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut s = String::from("iter,residual_linf,step,min_sigma2\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.17e},{:.17e},{:.17e}", r.iter, r.residual_linf, r.step, r.min_sigma2);
    }
    s
}

struct Problem {
    grid: TorusGrid,
    frame: FrameField,
    chi: HermitianField,
    rhs: Rhs,
}

impl Problem {
    fn new(cfg: &SolverConfig, scale: f64) -> Result<Problem> {
        let grid = cfg.validate()?;
        let frame = FrameField::standard(grid);
        let rhs = Rhs::new(&cfg.rhs, grid, &frame, scale)?;
        Ok(Problem { grid, chi: cfg.chi.field(grid), frame, rhs })
    }

    fn evaluate(&self, phi: &ScalarField) -> Result<Evaluated> {
        phi.check_grid(&self.grid)?;
        evaluate(phi, &self.chi, &self.frame, &self.rhs)
    }
}

/// `log σ₂(χ + ∂∂̄φ) − log C(n,2) − F(z, ∂φ, φ)` at every grid point.
pub fn residual(phi: &ScalarField, cfg: &SolverConfig) -> Result<ScalarField> {
    let p = Problem::new(cfg, 1.0)?;
    let ev = p.evaluate(phi)?;
    Ok(ScalarField { grid: phi.grid, samples: ev.residual })
}

/// The Fréchet derivative of [`residual`] at `phi` applied to `u`.
pub fn linearized_apply(phi: &ScalarField, u: &ScalarField, cfg: &SolverConfig) -> Result<ScalarField> {
    let p = Problem::new(cfg, 1.0)?;
    u.check_grid(&p.grid)?;
    let ev = p.evaluate(phi)?;
    let lin = Linearization::new(&ev, &p.frame, 0.0);
    Ok(ScalarField { grid: phi.grid, samples: lin.apply(&u.samples) })
}

pub fn newton_solve(cfg: &SolverConfig, phi0: &ScalarField) -> Result<SolverReport> {
    solve_scaled(cfg, phi0, 1.0, false)
}

/// Solves along the continuity family `t·F + b_t` for the given `t` values,
/// each solve starting from the previous solution. `b_t` is reported as
/// `rhs_shift` and is only free when `F` does not depend on `φ`.
pub fn continuation_solve(cfg: &SolverConfig, ts: &[f64]) -> Result<Vec<(f64, SolverReport)>> {
    let mut phi = ScalarField::zeros(cfg.validate()?);
    let mut out = Vec::with_capacity(ts.len());
    for &t in ts {
        let rep = solve_scaled(cfg, &phi, t, true)?;
        phi = rep.phi.clone();
        let stop = !rep.converged;
        out.push((t, rep));
        if stop {
            break;
        }
    }
    Ok(out)
}

fn c2_sup(phi: &ScalarField) -> f64 {
    let d = phi.grid.dims();
    let parts = hessian_parts(&phi.grid, &phi.samples);
    (0..phi.grid.len())
        .map(|i| {
            let mut s = 0.0;
            for a in 0..d {
                for b in 0..d {
                    let v = parts[crate::geometry::stencil::upper_index(d, a, b)][i];
                    s += v * v;
                }
            }
            s.sqrt()
        })
        .fold(0.0f64, f64::max)
}

fn solve_scaled(cfg: &SolverConfig, phi0: &ScalarField, scale: f64, free_constant: bool) -> Result<SolverReport> {
    let p = Problem::new(cfg, scale)?;
    phi0.check_grid(&p.grid)?;
    let gauge_applied = !p.rhs.depends_on_phi();
    let shift = if gauge_applied { CONSTANT_MODE_SHIFT } else { 0.0 };
    let free_constant = free_constant && gauge_applied;
    let eval_at = |phi: &ScalarField, b: f64| -> Result<Evaluated> {
        let mut ev = p.evaluate(phi)?;
        if b != 0.0 {
            ev.residual.iter_mut().for_each(|r| *r -= b);
        }
        Ok(ev)
    };

    let mut phi = phi0.clone();
    let mut b = 0.0;
    if gauge_applied {
        cfg.gauge.apply(&mut phi);
    }
    let mut ev = eval_at(&phi, b)?;
    if ev.min_sigma2() < cfg.cone_margin {
        let index = (0..ev.sigma2.len()).min_by(|&x, &y| ev.sigma2[x].total_cmp(&ev.sigma2[y])).unwrap_or(0);
        return Err(Error::FieldConeViolation { index, sigma1: ev.sigma1[index], sigma2: ev.sigma2[index] });
    }
    let mut rnorm = ev.residual_linf();
    let mut history = vec![HistoryRow { iter: 0, residual_linf: rnorm, step: 0.0, min_sigma2: ev.min_sigma2(), linear: None }];
    let mut iters = 0;
    let mut linear_stalls = 0;
    let stop_reason = loop {
        iters += 1;
        if rnorm <= cfg.newton_tol {
            break StopReason::Converged;
        }
        if iters > cfg.max_iters {
            iters -= 1;
            break StopReason::MaxIters;
        }
        let lin = Linearization::new(&ev, &p.frame, shift);
        let rhs: Vec<f64> = ev.residual.iter().map(|r| -r).collect();
        let (u, info) = krylov::bicgstab(|v| lin.apply(v), &lin.diagonal(), &rhs, cfg.linear);
        if !info.converged {
            linear_stalls += 1;
        }
        let db = if free_constant { shift * crate::geometry::pairwise_sum(&u) / u.len() as f64 } else { 0.0 };
        let mut t = 1.0;
        let accepted = loop {
            if t < cfg.damping.min_step {
                break None;
            }
            let mut trial = phi.clone();
            trial.samples.iter_mut().zip(&u).for_each(|(v, du)| *v += t * du);
            if gauge_applied {
                cfg.gauge.apply(&mut trial);
            }
            if let Ok(ev_t) = eval_at(&trial, b + t * db) {
                let r_t = ev_t.residual_linf();
                if ev_t.min_sigma2() >= cfg.cone_margin && r_t <= (1.0 - cfg.damping.armijo * t) * rnorm {
                    break Some((trial, ev_t, r_t));
                }
            }
            t *= cfg.damping.backtrack;
        };
        match accepted {
            Some((trial, ev_t, r_t)) => {
                phi = trial;
                ev = ev_t;
                rnorm = r_t;
                b += t * db;
                history.push(HistoryRow { iter: iters, residual_linf: rnorm, step: t, min_sigma2: ev.min_sigma2(), linear: Some(info) });
            }
            None => break StopReason::LineSearchFailed,
        }
    };
    Ok(SolverReport {
        converged: stop_reason == StopReason::Converged,
        iters,
        residual_linf: rnorm,
        min_sigma1: ev.min_sigma1(),
        min_sigma2: ev.min_sigma2(),
        c2_sup: c2_sup(&phi),
        phi,
        stop_reason,
        gauge_applied,
        rhs_shift: b,
        linear_stalls,
        history,
    })
}

/// The exact solution `φ* = δ cos x₀` and a configuration whose right-hand
/// side it solves with `χ = I`.
pub fn manufactured_case(n: usize, res: usize, delta: f64) -> Result<(ScalarField, SolverConfig)> {
    rhs::check_manufactured_delta(n, delta)?;
    let cfg = SolverConfig::new(n, res, RhsModel::Manufactured { delta });
    let grid = cfg.validate()?;
    Ok((ScalarField::from_fn(grid, |x| delta * x[0].cos()), cfg))
}

/// `sup |(φ − mean φ) − (ψ − mean ψ)|`.
pub fn gauge_aligned_error(phi: &ScalarField, psi: &ScalarField) -> Result<f64> {
    phi.check_grid(&psi.grid)?;
    let (a, b) = (phi.mean(), psi.mean());
    Ok(phi.samples.iter().zip(&psi.samples).fold(0.0f64, |m, (x, y)| m.max(((x - a) - (y - b)).abs())))
}

#[cfg(test)]
mod tests;
