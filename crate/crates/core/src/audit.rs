//! The maximum-principle ledger for the σ₂ equation on the flat torus.
//!
//! The test function is `Q̂ = log λ₁(Φ) + h(|∂φ|²) + e^{−Aφ}` with the barrier
//! `h(s) = −½ log(1 + K − s)`, `K = sup |∂φ|²`, and `Φ = ∇²φ − (I − V₁V₁ᵀ)`
//! built from the top eigenvector at the evaluation point. [`qhat_max`]
//! locates the grid maximum of `Q̂`; [`ledger`] evaluates every term of the
//! second-order inequality there in a unitary frame that diagonalizes
//! `g̃ = χ + ∂∂̄φ`.
//!
//! Third derivatives `∂_γ∂_β∂_δ φ` are first differences of the
//! fourth-order Hessian stencils, evaluated only at the audited point. The
//! frame `e'_p` is constant, so `e'_i(φ_{V_αV₁})` and `V₁(g̃_{kl̄})` are plain
//! contractions of that tensor.
//!
//! Slack entries are `bound − quantity`. The bounds keep only their explicit
//! terms; the additive uniform constants are dropped, so a negative slack is
//! the size of constant the bound needs at this point.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::stencil::PointStencil;
use crate::geometry::{grad_norm_sq, FrameField, ScalarField, TorusGrid};
use crate::linalg::jacobi_hermitian;
use crate::perturb::{self, SIMPLE_GAP_REL};
use crate::solver::SolverConfig;
use crate::symfun::{log_sigma2_jet, Spectrum};

/// `h`, `h′`, `h″` at `s` for the barrier with `K = sup|∂φ|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierJet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub sup_grad_sq: f64,
}

pub fn barrier_jet(s: f64, k: f64) -> Result<BarrierJet> {
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::Domain(format!("K = {k} must be finite and nonnegative")));
    }
    if !(0.0..=k).contains(&s) {
        return Err(Error::Domain(format!("s = {s} is outside [0, K = {k}]")));
    }
    let u = 1.0 + (k - s);
    let d1 = 0.5 / u;
    let jet = BarrierJet { value: -0.5 * u.ln(), d1, d2: 2.0 * d1 * d1, sup_grad_sq: k };
    assert!(jet.d1 <= 0.5 && jet.d1 >= 1.0 / (2.0 + 2.0 * k));
    assert!(jet.d2 >= 2.0 * jet.d1 * jet.d1);
    Ok(jet)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub coords: Vec<f64>,
}

impl GridPoint {
    fn new(grid: &TorusGrid, index: usize) -> Self {
        GridPoint { index, coords: grid.coords(index) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QhatMax {
    pub x0: GridPoint,
    pub qhat: f64,
    pub lambda1: f64,
    pub v1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum QhatOutcome {
    Interior(QhatMax),
    /// `λ₁(∇²φ) ≤ 0` at every grid point, which bounds `λ₁` directly.
    BoundedByZero,
}

fn check_a(a: f64) -> Result<()> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidArgument(format!("A = {a} must be positive")));
    }
    Ok(())
}

fn local_hessian(ps: &PointStencil, f: &[f64], idx: usize, d: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(d, d);
    for a in 0..d {
        h[(a, a)] = ps.d2(f, idx, a);
        for b in a + 1..d {
            let v = ps.d11(f, idx, a, b);
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    h
}

/// `λ₁` and `V₁` of `∇²φ`, passing through `Φ` when the top gap is below the
/// simplicity threshold.
fn top_pair(h: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let e = perturb::eig(h)?;
    let scale = e.lambdas.iter().fold(0.0f64, |m, l| m.max(l.abs())).max(1e-300);
    if e.top_gap() > SIMPLE_GAP_REL * scale {
        return Ok((e.lambdas[0], e.vees.column(0).into_owned()));
    }
    let p = perturb::build_phi(&e, h);
    let ep = perturb::eig(&p.phi)?;
    Ok((ep.lambdas[0], ep.vees.column(0).into_owned()))
}

fn better(a: Option<(f64, usize)>, b: Option<(f64, usize)>) -> Option<(f64, usize)> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(p), Some(q)) => {
            if q.0 > p.0 || (q.0 == p.0 && q.1 < p.1) {
                Some(q)
            } else {
                Some(p)
            }
        }
    }
}

pub fn qhat_max(phi: &ScalarField, a: f64, frame: &FrameField) -> Result<QhatOutcome> {
    check_a(a)?;
    let grid = phi.grid;
    let gn = grad_norm_sq(phi, frame)?;
    let k = gn.sup();
    let ps = PointStencil::new(&grid);
    let d = grid.dims();
    let best = (0..grid.len())
        .into_par_iter()
        .map(|idx| -> Result<Option<(f64, usize)>> {
            let (l1, _) = top_pair(&local_hessian(&ps, &phi.samples, idx, d))?;
            if l1 <= 0.0 {
                return Ok(None);
            }
            let h = barrier_jet(gn.samples[idx], k)?;
            Ok(Some((l1.ln() + h.value + (-a * phi.samples[idx]).exp(), idx)))
        })
        .try_reduce(|| None, |p, q| Ok(better(p, q)))?;
    let Some((qhat, idx)) = best else {
        return Ok(QhatOutcome::BoundedByZero);
    };
    let (lambda1, v1) = top_pair(&local_hessian(&ps, &phi.samples, idx, d))?;
    Ok(QhatOutcome::Interior(QhatMax { x0: GridPoint::new(&grid, idx), qhat, lambda1, v1: v1.iter().copied().collect() }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Slack {
    Measured { value: f64 },
    PreconditionMet { value: f64, threshold: f64 },
    PreconditionNotMet { value: f64, threshold: f64 },
}

impl Slack {
    pub fn value(&self) -> f64 {
        match *self {
            Slack::Measured { value } | Slack::PreconditionMet { value, .. } | Slack::PreconditionNotMet { value, .. } => value,
        }
    }
}

/// How well `x₀` satisfies `dQ̂ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderCheck {
    /// Euclidean norm of the stencil gradient of `Q̂` (with `Φ` frozen at `x₀`).
    /// `None` when the stencil reaches a point where the frozen `λ₁` is not
    /// positive, which happens on grids too coarse to resolve the maximum.
    pub discrete_grad_norm: Option<f64>,
    /// `max_i |e_i(φ_{V₁V₁})/λ₁ − Ae^{−Aφ}e_i(φ) + h′e_i(|∂φ|²)|`.
    pub analytic_residual: f64,
    /// `‖(δ²_β Q̂/h)_β‖`: the gradient a grid maximum may carry when the
    /// smooth maximum sits up to half a cell away.
    pub tolerance: f64,
}

impl FirstOrderCheck {
    pub fn holds(&self) -> bool {
        self.discrete_grad_norm.is_some_and(|g| g <= self.tolerance) && self.analytic_residual <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditLedger {
    pub x0: GridPoint,
    #[serde(rename = "A")]
    pub a: f64,
    pub eps: f64,
    pub qhat: f64,
    pub barrier: BarrierJet,
    /// Eigenvalues of `Φ`, descending.
    pub lambda: Vec<f64>,
    pub eta: Spectrum,
    /// `G^{iī} = σ₁(η|i)/σ₂`.
    pub g_ii: Vec<f64>,
    pub sigma2: f64,
    pub nu: Vec<Complex64>,
    /// `μ_α` for `α = 2, …, 2n`.
    pub mu: Vec<f64>,
    pub gamma: f64,
    #[serde(rename = "term_I")]
    pub term_i: f64,
    #[serde(rename = "term_II")]
    pub term_ii: f64,
    #[serde(rename = "term_II1")]
    pub term_ii1: f64,
    #[serde(rename = "term_II2")]
    pub term_ii2: f64,
    #[serde(rename = "term_II3")]
    pub term_ii3: f64,
    pub first_order: FirstOrderCheck,
    pub slacks: BTreeMap<String, Slack>,
}

impl AuditLedger {
    /// `|II₁ + II₂ + II₃ − II| / |II|`, or the absolute defect when `II = 0`.
    pub fn split_defect(&self) -> f64 {
        let d = (self.term_ii1 + self.term_ii2 + self.term_ii3 - self.term_ii).abs();
        if self.term_ii == 0.0 {
            d
        } else {
            d / self.term_ii.abs()
        }
    }

    pub fn nu_norm_sq(&self) -> f64 {
        self.nu.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn mu_norm_sq(&self) -> f64 {
        self.mu.iter().map(|m| m * m).sum()
    }
}

/// Audits `φ` at the grid maximum of `Q̂`.
pub fn ledger(phi: &ScalarField, a: f64, eps: f64, cfg: &SolverConfig) -> Result<AuditLedger> {
    let grid = cfg.validate()?;
    phi.check_grid(&grid)?;
    match qhat_max(phi, a, &FrameField::standard(grid))? {
        QhatOutcome::Interior(m) => ledger_at(phi, m.x0.index, a, eps, cfg),
        QhatOutcome::BoundedByZero => Err(Error::Domain("λ₁(∇²φ) ≤ 0 everywhere; there is no interior maximum to audit".into())),
    }
}

/// Evaluates the ledger at an arbitrary grid point with `λ₁ > 0`.
pub fn ledger_at(phi: &ScalarField, index: usize, a: f64, eps: f64, cfg: &SolverConfig) -> Result<AuditLedger> {
    check_a(a)?;
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::InvalidArgument(format!("ε = {eps} must lie in (0, 1/2]")));
    }
    let grid = cfg.validate()?;
    phi.check_grid(&grid)?;
    if index >= grid.len() {
        return Err(Error::InvalidArgument(format!("grid index {index} out of range")));
    }
    let (n, d) = (grid.n(), grid.dims());
    let f = &phi.samples;
    let frame = FrameField::standard(grid);
    let ps = PointStencil::new(&grid);
    let gn = grad_norm_sq(phi, &frame)?;
    let barrier = barrier_jet(gn.samples[index], gn.sup())?;

    // Φ with V₁ from x₀, and its eigensystem.
    let hess = local_hessian(&ps, f, index, d);
    let eh = perturb::eig(&hess)?;
    if eh.lambdas[0] <= 0.0 {
        return Err(Error::Domain(format!("λ₁ = {:e} is not positive at grid point {index}", eh.lambdas[0])));
    }
    let pe = perturb::build_phi(&eh, &hess);
    let ephi = perturb::eig(&pe.phi)?;
    if !(ephi.top_gap() >= 0.5) {
        return Err(Error::Multiplicity { gap: ephi.top_gap() });
    }
    let lambda = ephi.lambdas.clone();
    let l1 = lambda[0];
    let v = &ephi.vees;
    let v1: Vec<f64> = v.column(0).iter().copied().collect();

    // Unitary frame diagonalizing g̃ at x₀.
    let base = DMatrix::from_fn(n, d, |i, b| frame.coeff(index, i, b));
    let hc = hess.map(|x| Complex64::new(x, 0.0));
    let eps0 = cfg.chi.eps0();
    let gt = &base * &hc * base.adjoint() + DMatrix::<Complex64>::identity(n, n) * Complex64::new(eps0, 0.0);
    let he = jacobi_hermitian(&gt)?;
    let ap = he.vectors.adjoint() * &base;
    let eta = Spectrum::new(he.values.clone())?;
    let jet = log_sigma2_jet(&eta)?;
    let g = &jet.grad;

    // Derivatives at x₀.
    let gphi: Vec<f64> = (0..d).map(|b| ps.d1(f, index, b)).collect();
    let ggn: Vec<f64> = (0..d).map(|b| ps.d1(&gn.samples, index, b)).collect();
    let third = third_derivatives(&ps, &grid, f, index);
    let along = |i: usize, w: &[f64]| -> Complex64 { (0..d).map(|b| ap[(i, b)] * w[b]).sum() };
    let e_phi: Vec<Complex64> = (0..n).map(|i| along(i, &gphi)).collect();
    let e_gn: Vec<Complex64> = (0..n).map(|i| along(i, &ggn)).collect();

    // e'_i(φ_{V_αV₁}) for every α.
    let dv: Vec<Vec<Complex64>> = (0..d)
        .map(|al| {
            let w: Vec<f64> = (0..d)
                .map(|gm| {
                    let t = &third[gm];
                    (0..d).map(|b| (0..d).map(|dl| v[(b, al)] * v1[dl] * t[(b, dl)]).sum::<f64>()).sum()
                })
                .collect();
            (0..n).map(|i| along(i, &w)).collect()
        })
        .collect();
    // V₁(g̃_{kl̄}) in the diagonal frame.
    let s = third.iter().zip(&v1).fold(DMatrix::<f64>::zeros(d, d), |acc, (t, c)| acc + t * *c);
    let dg = &ap * s.map(|x| Complex64::new(x, 0.0)) * ap.adjoint();

    let mut good_third = 0.0;
    for (al, row) in dv.iter().enumerate().skip(1) {
        let w: f64 = (0..n).map(|i| g[i] * row[i].norm_sqr()).sum();
        good_third += w / (l1 * (l1 - lambda[al]));
    }
    good_third *= 2.0 - eps;
    let mut good_offdiag = 0.0;
    for k in 0..n {
        for l in 0..n {
            if k != l {
                good_offdiag += dg[(k, l)].norm_sqr();
            }
        }
    }
    good_offdiag /= jet.sigma2 * l1;
    let diag: Vec<f64> = (0..n).map(|k| dg[(k, k)].re).collect();
    let mut good_concave = 0.0;
    for i in 0..n {
        for k in 0..n {
            good_concave -= jet.hess_diag[(i, k)] * diag[i] * diag[k];
        }
    }
    good_concave /= l1;
    let term_i = good_third + good_offdiag + good_concave;

    let bad: Vec<f64> = (0..n).map(|i| g[i] * dv[0][i].norm_sqr() / (l1 * l1)).collect();
    let bad_tail: f64 = bad[1..].iter().sum();
    let term_ii = (1.0 + eps) * bad.iter().sum::<f64>();
    let (term_ii1, term_ii2, term_ii3) = ((1.0 + eps) * bad[0], 3.0 * eps * bad_tail, (1.0 - 2.0 * eps) * bad_tail);

    // ẽ = (V₁ − √−1 JV₁)/√2, with J∂_{2k} = ∂_{2k+1}.
    let mut jv1 = vec![0.0; d];
    for k in 0..n {
        jv1[2 * k + 1] = v1[2 * k];
        jv1[2 * k] = -v1[2 * k + 1];
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let nu: Vec<Complex64> = (0..n)
        .map(|q| (0..d).map(|b| Complex64::new(r * v1[b], -r * jv1[b]) * ap[(q, b)].conj()).sum())
        .collect();
    let mu: Vec<f64> = (1..d).map(|al| (0..d).map(|b| v[(b, al)] * jv1[b]).sum()).collect();
    let weighted: f64 = mu.iter().enumerate().map(|(k, m)| lambda[k + 1] * m * m).sum();
    let gamma = (l1 - weighted) / (l1 + weighted);

    // Slack measurements.
    let h1 = barrier.d1;
    let weight = (-a * f[index]).exp();
    let tail_sum = |terms: &dyn Fn(usize) -> f64| -> f64 { (1..n).map(terms).sum() };
    let ii1_slack = 2.0 * h1 * h1 * g[0] * e_gn[0].norm_sqr() - term_ii1;
    let ii2_slack = 12.0 * eps * a * a * weight * weight * tail_sum(&|i| g[i] * e_phi[i].norm_sqr())
        + 2.0 * h1 * h1 * tail_sum(&|i| g[i] * e_gn[i].norm_sqr())
        - term_ii2;
    let nu_tail_bound = l1 * nu.iter().skip(1).fold(0.0f64, |m, z| m.max(z.norm()));

    let hess_pair = |i: usize, k: usize, conj: bool| -> Complex64 {
        let mut z = Complex64::new(0.0, 0.0);
        for b in 0..d {
            for c in 0..d {
                let ak = if conj { ap[(k, c)].conj() } else { ap[(k, c)] };
                z += ap[(i, b)] * ak * hess[(b, c)];
            }
        }
        z
    };
    let mixed: Vec<f64> =
        (0..n).map(|i| (0..n).map(|k| hess_pair(i, k, false).norm_sqr() + hess_pair(i, k, true).norm_sqr()).sum()).collect();
    let mixed_tail: f64 = mixed[1..].iter().sum();
    let all_mixed: f64 = (0..n).map(|i| g[i] * mixed[i]).sum();

    let eta_v = eta.values();
    let ca_proxy = mixed_tail.max(eta_v[1..].iter().map(|x| x.abs()).sum()).max(1.0);
    let threshold = ca_proxy / eps;
    let gii_max = g[1..].iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x));
    let gii_margin = (l1 + weighted) / (2.0 * jet.sigma2) - (1.0 - eps) * gii_max;
    let gii_slack = if l1 >= threshold {
        Slack::PreconditionMet { value: gii_margin, threshold }
    } else {
        Slack::PreconditionNotMet { value: gii_margin, threshold }
    };

    let sum_g: f64 = g.iter().sum();
    let total_lower_bound = term_i - term_ii
        + 0.25 * h1 * all_mixed
        + barrier.d2 * (0..n).map(|i| g[i] * e_gn[i].norm_sqr()).sum::<f64>()
        + eps0 * a * weight * sum_g
        + a * a * weight * (0..n).map(|i| g[i] * e_phi[i].norm_sqr()).sum::<f64>();

    let mut slacks = BTreeMap::new();
    slacks.insert("lemma41_II1".to_string(), Slack::Measured { value: ii1_slack });
    slacks.insert("lemma41_II2".to_string(), Slack::Measured { value: ii2_slack });
    slacks.insert("lemma42_nu".to_string(), Slack::Measured { value: nu_tail_bound });
    slacks.insert("lemma43_gii".to_string(), gii_slack);
    slacks.insert("cor35_tail".to_string(), Slack::Measured { value: mixed_tail });
    slacks.insert("cor35_lambda_eta_ratio".to_string(), Slack::Measured { value: l1 / eta_v[0] });
    slacks.insert("prop34_total".to_string(), Slack::Measured { value: total_lower_bound });

    let analytic_residual = (0..n)
        .map(|i| (dv[0][i] / l1 - e_phi[i] * (a * weight) + e_gn[i] * h1).norm())
        .fold(0.0f64, f64::max);
    let first_order = first_order_check(phi, &gn, index, a, barrier.sup_grad_sq, &pe.bee, analytic_residual)?;
    let qhat = l1.ln() + barrier.value + weight;

    Ok(AuditLedger {
        x0: GridPoint::new(&grid, index),
        a,
        eps,
        qhat,
        barrier,
        lambda,
        eta,
        g_ii: g.clone(),
        sigma2: jet.sigma2,
        nu,
        mu,
        gamma,
        term_i,
        term_ii,
        term_ii1,
        term_ii2,
        term_ii3,
        first_order,
        slacks,
    })
}

/// `T[γ][(β, δ)] = ∂_γ∂_β∂_δ φ` at `idx`.
fn third_derivatives(ps: &PointStencil, grid: &TorusGrid, f: &[f64], idx: usize) -> Vec<DMatrix<f64>> {
    let d = grid.dims();
    let c = 1.0 / (12.0 * grid.spacing());
    (0..d)
        .map(|gm| {
            let at = |o: isize| local_hessian(ps, f, grid.shift(idx, gm, o), d);
            ((at(-2) - at(2)) + (at(1) - at(-1)) * 8.0) * c
        })
        .collect()
}

fn first_order_check(
    phi: &ScalarField,
    gn: &ScalarField,
    idx: usize,
    a: f64,
    k: f64,
    bee: &DMatrix<f64>,
    analytic_residual: f64,
) -> Result<FirstOrderCheck> {
    let grid = phi.grid;
    let d = grid.dims();
    let ps = PointStencil::new(&grid);
    let q = |j: usize| -> Result<Option<f64>> {
        let l = perturb::lambda1(&(local_hessian(&ps, &phi.samples, j, d) - bee))?;
        if l <= 0.0 {
            return Ok(None);
        }
        Ok(Some(l.ln() + barrier_jet(gn.samples[j], k)?.value + (-a * phi.samples[j]).exp()))
    };
    let h = grid.spacing();
    let Some(q0) = q(idx)? else {
        return Err(Error::Domain("λ₁ is not positive at the audited point".into()));
    };
    let (mut grad_sq, mut tol_sq) = (Some(0.0), 0.0);
    for b in 0..d {
        let v: Vec<Option<f64>> = [-2, -1, 1, 2].iter().map(|&o| q(grid.shift(idx, b, o))).collect::<Result<_>>()?;
        if let (Some(m1), Some(p1)) = (v[1], v[2]) {
            let second = (m1 - 2.0 * q0 + p1) / h;
            tol_sq += second * second;
        }
        grad_sq = match (grad_sq, v[0], v[1], v[2], v[3]) {
            (Some(acc), Some(m2), Some(m1), Some(p1), Some(p2)) => {
                let g = ((m2 - p2) + 8.0 * (p1 - m1)) / (12.0 * h);
                Some(acc + g * g)
            }
            _ => None,
        };
    }
    let tolerance = tol_sq.sqrt() + 1e-12 * (1.0 + q0.abs());
    Ok(FirstOrderCheck { discrete_grad_norm: grad_sq.map(f64::sqrt), analytic_residual, tolerance })
}
