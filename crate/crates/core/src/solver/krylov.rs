//! Right-preconditioned BiCGSTAB with a diagonal preconditioner.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::pairwise_sum;

const CHUNK: usize = 4096;

/// Dot product with a fixed reduction tree, independent of the thread count.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a.par_chunks(CHUNK).zip(b.par_chunks(CHUNK)).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum()).collect();
    pairwise_sum(&partial)
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSettings {
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for LinearSettings {
    fn default() -> Self {
        LinearSettings { max_iters: 2000, rel_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearSolveInfo {
    pub iters: usize,
    pub rel_residual: f64,
    pub converged: bool,
    /// The recurrence hit an exact zero denominator.
    pub breakdown: bool,
}

/// Solves `A x = b` from `x = 0`, with `A` given by `apply` and the
/// preconditioner `diag⁻¹`.
pub(crate) fn bicgstab<F>(apply: F, diag: &[f64], b: &[f64], settings: LinearSettings) -> (Vec<f64>, LinearSolveInfo)
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let inv: Vec<f64> = diag.iter().map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let precond = |v: &[f64]| -> Vec<f64> { v.par_iter().zip(&inv).map(|(x, w)| x * w).collect() };
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    let mut info = LinearSolveInfo { iters: 0, rel_residual: 0.0, converged: true, breakdown: false };
    if bnorm == 0.0 {
        return (x, info);
    }
    let target = settings.rel_tol * bnorm;
    let mut r = b.to_vec();
    let r_hat = b.to_vec();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    info.converged = false;
    for it in 1..=settings.max_iters {
        info.iters = it;
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            info.breakdown = true;
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        p.par_iter_mut().zip(&r).zip(&v).for_each(|((pi, ri), vi)| *pi = ri + beta * (*pi - omega * vi));
        let p_hat = precond(&p);
        v = apply(&p_hat);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            info.breakdown = true;
            break;
        }
        alpha = rho / denom;
        let s: Vec<f64> = r.par_iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        let snorm = norm(&s);
        if snorm <= target {
            x.par_iter_mut().zip(&p_hat).for_each(|(xi, pi)| *xi += alpha * pi);
            info.rel_residual = snorm / bnorm;
            info.converged = true;
            return (x, info);
        }
        let s_hat = precond(&s);
        let t = apply(&s_hat);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        x.par_iter_mut().zip(&p_hat).zip(&s_hat).for_each(|((xi, pi), si)| *xi += alpha * pi + omega * si);
        r.par_iter_mut().zip(&s).zip(&t).for_each(|((ri, si), ti)| *ri = si - omega * ti);
        let rn = norm(&r);
        info.rel_residual = rn / bnorm;
        if rn <= target {
            info.converged = true;
            return (x, info);
        }
    }
    info.rel_residual = norm(&residual(&apply, &x, b)) / bnorm;
    (x, info)
}

fn residual<F: Fn(&[f64]) -> Vec<f64>>(apply: &F, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = apply(x);
    b.iter().zip(&ax).map(|(p, q)| p - q).collect()
}
