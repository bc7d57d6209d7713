use sigma2_core::nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigma2_core::concavity::{assemble, det_identity, spectral, weyl_envelope};
use sigma2_core::linalg::frobenius;
use sigma2_core::perturb::{d2_lambda1_form, d_lambda1, eig, lambda1};
use sigma2_core::symfun::{inequality_slacks, sample_gamma_k};

use crate::output::num;

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub violations: usize,
}

/// Like `sample_gamma_k` with `k = 2`, but an empty request yields no samples.
pub fn sample_gamma2(n: usize, samples: usize, seed: u64) -> Result<Vec<sigma2_core::Spectrum>, String> {
    if samples == 0 {
        return Ok(Vec::new());
    }
    sample_gamma_k(n, 2, samples, seed).map_err(|e| e.to_string())
}

fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

pub fn symfun(n: usize, samples: usize, seed: u64) -> Result<Table, String> {
    let etas = sample_gamma2(n, samples, seed)?;
    let mut header = vec!["n".to_string()];
    header.extend(indexed("eta", n));
    header.extend(["maclaurin_sum_slack", "eta1_sigma1_slack", "sigma1_product_slack", "min_grad_ratio"].map(String::from));
    let mut rows = Vec::with_capacity(etas.len());
    let mut violations = 0;
    for eta in &etas {
        let s = inequality_slacks(eta).map_err(|e| e.to_string())?;
        if s.maclaurin_sum_slack < -1e-12 || s.eta1_sigma1_slack < -1e-12 || s.sigma1_product_slack < -1e-12 {
            violations += 1;
        }
        let mut row = vec![n.to_string()];
        row.extend(eta.values().iter().map(|&x| num(x)));
        row.extend([s.maclaurin_sum_slack, s.eta1_sigma1_slack, s.sigma1_product_slack, s.min_grad_ratio].map(num));
        rows.push(row);
    }
    Ok(Table { header, rows, violations })
}

pub fn concavity(n: usize, samples: usize, seed: u64) -> Result<Table, String> {
    let etas = sample_gamma2(n, samples, seed)?;
    let mut header = vec!["n".to_string()];
    header.extend(indexed("eta", n));
    header.extend(indexed("kappa", n));
    header.extend(["det", "predicted_det"].map(String::from));
    let mut rows = Vec::with_capacity(etas.len());
    let mut violations = 0;
    for eta in &etas {
        let m = assemble(eta).map_err(|e| e.to_string())?;
        let spec = spectral(&m).map_err(|e| e.to_string())?;
        let env = weyl_envelope(eta).map_err(|e| e.to_string())?;
        let (det, want) = det_identity(eta).map_err(|e| e.to_string())?;
        let inside = env.contains(&spec.kappas, 1e-12 * frobenius(&m.entries));
        if (det - want).abs() > 1e-10 * want.abs() || !inside || spec.kappas[n - 1] <= 0.0 {
            violations += 1;
        }
        let mut row = vec![n.to_string()];
        row.extend(eta.values().iter().map(|&x| num(x)));
        row.extend(spec.kappas.iter().map(|&x| num(x)));
        row.extend([num(det), num(want)]);
        rows.push(row);
    }
    Ok(Table { header, rows, violations })
}

/// Finite-difference checks of the λ₁ derivatives on `2n × 2n` matrices with
/// top gap at least 1 and unit-Frobenius directions.
pub fn perturb(n: usize, samples: usize, seed: u64) -> Result<Table, String> {
    let m = 2 * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let header = ["instance", "lambda1", "gap", "d1_analytic", "d1_fd", "d2_analytic", "d2_fd"].map(String::from).to_vec();
    let (h1, h2) = (1e-4, 1e-3);
    let mut rows = Vec::with_capacity(samples);
    let mut violations = 0;
    for k in 0..samples {
        let q = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
        let mut lam: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let top = lam.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0 + rng.gen_range(0.0..1.0);
        lam.push(top);
        let h = &q * DMatrix::from_diagonal(&DVector::from_vec(lam)) * q.transpose();
        let h = (&h + h.transpose()) * 0.5;
        let e = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
        let e = (&e + e.transpose()) * 0.5;
        let e = &e / frobenius(&e);
        let es = eig(&h).map_err(|e| e.to_string())?;
        let d1 = d_lambda1(&es).map_err(|e| e.to_string())?.component_mul(&e).sum();
        let d2 = d2_lambda1_form(&es, &e).map_err(|e| e.to_string())?;
        let at = |s: f64| lambda1(&(&h + &e * s)).map_err(|e| e.to_string());
        let fd1 = (at(h1)? - at(-h1)?) / (2.0 * h1);
        let fd2 = (at(h2)? - 2.0 * at(0.0)? + at(-h2)?) / (h2 * h2);
        if (d1 - fd1).abs() > 1e-8 || (d2 - fd2).abs() > 1e-4 {
            violations += 1;
        }
        rows.push(vec![k.to_string(), num(es.lambdas[0]), num(es.top_gap()), num(d1), num(fd1), num(d2), num(fd2)]);
    }
    Ok(Table { header, rows, violations })
}
