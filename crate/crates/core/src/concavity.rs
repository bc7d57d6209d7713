//! The concavity matrix `M = (−G^{iī,kk̄})` of `log σ₂` in eigenvalue
//! variables, together with its determinant identity, its spectrum, Weyl-type
//! envelopes, a structured elimination for the bottom eigenvector, and the
//! large-`η₁` decay profile of that eigenvector.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::linalg;
use crate::symfun::{check_gamma2, sigma1_excl_all, Spectrum};

/// Eigenvalues closer than this multiple of `‖M‖_F` form one cluster.
pub const CLUSTER_REL_TOL: f64 = 1e-9;

/// Relative pivot threshold for the structured elimination.
pub const PIVOT_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ConcavityMatrix {
    pub entries: DMatrix<f64>,
    pub sigma2: f64,
    /// `σ₁(η|i)` for each `i`.
    pub sigma1_excl: Vec<f64>,
}

impl ConcavityMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }
}

pub fn assemble(eta: &Spectrum) -> Result<ConcavityMatrix> {
    let v = eta.values();
    let n = v.len();
    if n < 2 {
        return Err(Error::InvalidArgument("concavity matrix needs n ≥ 2".into()));
    }
    let (_, s2) = check_gamma2(v)?;
    let s = sigma1_excl_all(v);
    let inv = 1.0 / s2;
    let entries = DMatrix::from_fn(n, n, |i, k| {
        let g = s[i] * inv * (s[k] * inv);
        if i == k {
            g
        } else {
            g - inv
        }
    });
    Ok(ConcavityMatrix { entries, sigma2: s2, sigma1_excl: s })
}

/// `Σ_{i,k} M_ik P_iī P_kk̄ + Σ_{i≠k} |P_ik̄|²/σ₂`: the negated second variation
/// of `log σ₂` at the diagonal point `η` in the Hermitian direction `P`.
pub fn quad_form(eta: &Spectrum, p: &DMatrix<Complex64>) -> Result<f64> {
    let n = eta.len();
    if p.nrows() != n || p.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "direction is {}×{}, expected {n}×{n}",
            p.nrows(),
            p.ncols()
        )));
    }
    let scale = p.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
    for i in 0..n {
        for k in i..n {
            if (p[(i, k)] - p[(k, i)].conj()).norm() > 1e-12 * scale {
                return Err(Error::InvalidArgument(format!("direction is not Hermitian at ({i}, {k})")));
            }
        }
    }
    let m = assemble(eta)?;
    let d: Vec<f64> = (0..n).map(|i| p[(i, i)].re).collect();
    let mut total = 0.0;
    for i in 0..n {
        for k in 0..n {
            total += m.entries[(i, k)] * d[i] * d[k];
            if i != k {
                total += p[(i, k)].norm_sqr() / m.sigma2;
            }
        }
    }
    Ok(total)
}

/// Determinant of `M` by LU with partial pivoting, and `(n−1)σ₂^{−n}`.
///
/// Near the cone boundary `M` is dominated by the rank-one part `s sᵀ/σ₂²`
/// and its determinant cancels by many orders of magnitude, so the entries
/// and the elimination are carried in double-double arithmetic. The factored
/// matrix is `σ₂² M = s sᵀ − σ₂(J − I)`, rescaled afterwards.
pub fn det_identity(eta: &Spectrum) -> Result<(f64, f64)> {
    let v = eta.values();
    let n = v.len();
    if n < 2 {
        return Err(Error::InvalidArgument("concavity matrix needs n ≥ 2".into()));
    }
    check_gamma2(v)?;
    let zero = TwoFloat::from(0.0);
    let total = v.iter().fold(zero, |acc, &x| acc + x);
    let s: Vec<TwoFloat> = v.iter().map(|&x| total - x).collect();
    let mut s2 = zero;
    for i in 0..n {
        for j in i + 1..n {
            s2 += TwoFloat::new_mul(v[i], v[j]);
        }
    }
    let scaled: Vec<TwoFloat> = (0..n * n)
        .map(|idx| {
            let (i, k) = (idx / n, idx % n);
            let p = s[i] * s[k];
            if i == k {
                p
            } else {
                p - s2
            }
        })
        .collect();
    let det_scaled = linalg::determinant_dd(n, &scaled);
    let s2_sq = s2 * s2;
    let mut det = det_scaled;
    let mut s2_pow = TwoFloat::from(1.0);
    for _ in 0..n {
        det = linalg::dd_div(det, s2_sq);
        s2_pow *= s2;
    }
    let predicted = linalg::dd_div(TwoFloat::from((n - 1) as f64), s2_pow);
    Ok((f64::from(det), f64::from(predicted)))
}

/// [`det_identity`] in plain double precision on the assembled matrix.
pub fn det_identity_f64(eta: &Spectrum) -> Result<(f64, f64)> {
    let m = assemble(eta)?;
    let n = m.n() as i32;
    let det = linalg::determinant(&m.entries);
    let predicted = (n - 1) as f64 * m.sigma2.powi(-n);
    Ok((det, predicted))
}

/// The three determinants of the rank-one split `σ₂²M = M₁ − M₂` with
/// `M₁ = s sᵀ` and `M₂ = σ₂(J − I)`, alongside their predicted values.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitDeterminants {
    /// `Σ_i det A_i`, where `A_i` is `−M₂` with column `i` replaced by `s_i s`.
    pub sum_det_a: f64,
    pub sum_det_a_predicted: f64,
    pub det_m2: f64,
    pub det_m2_predicted: f64,
    /// `det(M₁ − M₂)` computed directly.
    pub det_m1_minus_m2: f64,
    /// `Σ det A_i + (−1)ⁿ det M₂`.
    pub recombined: f64,
}

pub fn split_determinants(eta: &Spectrum) -> Result<SplitDeterminants> {
    let v = eta.values();
    let n = v.len();
    if n < 2 {
        return Err(Error::InvalidArgument("split needs n ≥ 2".into()));
    }
    let (_, s2) = check_gamma2(v)?;
    let s = sigma1_excl_all(v);
    let m2 = DMatrix::from_fn(n, n, |i, k| if i == k { 0.0 } else { s2 });
    let neg_m2 = -&m2;
    let mut sum_det_a = 0.0;
    for i in 0..n {
        let mut a = neg_m2.clone();
        for k in 0..n {
            a[(k, i)] = s[k] * s[i];
        }
        sum_det_a += linalg::determinant(&a);
    }
    let det_m2 = linalg::determinant(&m2);
    let m1_minus_m2 = DMatrix::from_fn(n, n, |i, k| s[i] * s[k] - m2[(i, k)]);
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let nf = (n - 1) as f64;
    let s2n = s2.powi(n as i32);
    Ok(SplitDeterminants {
        sum_det_a,
        sum_det_a_predicted: 2.0 * nf * s2n,
        det_m2,
        det_m2_predicted: -sign * nf * s2n,
        det_m1_minus_m2: linalg::determinant(&m1_minus_m2),
        recombined: sum_det_a + sign * det_m2,
    })
}

#[derive(Debug, Clone)]
pub struct ConcavitySpectrum {
    /// Descending eigenvalues `κ₁ ≥ … ≥ κ_n`.
    pub kappas: Vec<f64>,
    /// Column `i` is the unit eigenvector `ξ_{i+1}`.
    pub xis: DMatrix<f64>,
    /// Index groups of eigenvalues within `CLUSTER_REL_TOL·‖M‖_F` of a neighbour.
    pub clusters: Vec<Vec<usize>>,
}

impl ConcavitySpectrum {
    /// Whether eigenvalue `i` is separated from all others.
    pub fn is_simple(&self, i: usize) -> bool {
        self.clusters.iter().all(|c| c.len() == 1 || !c.contains(&i))
    }

    pub fn xi(&self, i: usize) -> DVector<f64> {
        self.xis.column(i).clone_owned()
    }
}

pub fn spectral(m: &ConcavityMatrix) -> Result<ConcavitySpectrum> {
    let e = linalg::jacobi_symmetric(&m.entries)?;
    let tol = CLUSTER_REL_TOL * linalg::frobenius(&m.entries);
    let mut clusters: Vec<Vec<usize>> = vec![vec![0]];
    for i in 1..e.values.len() {
        if e.values[i - 1] - e.values[i] <= tol {
            clusters.last_mut().unwrap().push(i);
        } else {
            clusters.push(vec![i]);
        }
    }
    Ok(ConcavitySpectrum { kappas: e.values, xis: e.vectors, clusters })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WeylEnvelope {
    /// `Σ σ₁(η|i)²`.
    pub a1: f64,
    /// `(n−1)σ₂`.
    pub b1: f64,
    /// `−σ₂`.
    pub bn: f64,
    pub kappa1_lo: f64,
    pub kappa1_hi: f64,
    /// Upper bound for `κ_i`, `i ≥ 2`.
    pub kappa_tail_hi: f64,
    /// `(σ₁(η|1)/σ₂)²`, an upper bound for `κ_n`.
    pub kappa_n_hi: f64,
}

impl WeylEnvelope {
    /// Whether a descending spectrum respects every bound, up to `tol`.
    pub fn contains(&self, kappas: &[f64], tol: f64) -> bool {
        let n = kappas.len();
        kappas[0] >= self.kappa1_lo - tol
            && kappas[0] <= self.kappa1_hi + tol
            && kappas[1..].iter().all(|&k| k <= self.kappa_tail_hi + tol)
            && kappas[n - 1] <= self.kappa_n_hi + tol
    }
}

pub fn weyl_envelope(eta: &Spectrum) -> Result<WeylEnvelope> {
    let v = eta.values();
    let (_, s2) = check_gamma2(v)?;
    let s = sigma1_excl_all(v);
    let n = v.len() as f64;
    let a1: f64 = s.iter().map(|x| x * x).sum();
    let b1 = (n - 1.0) * s2;
    let bn = -s2;
    let q = s2 * s2;
    Ok(WeylEnvelope {
        a1,
        b1,
        bn,
        kappa1_lo: (a1 - b1) / q,
        kappa1_hi: (a1 - bn) / q,
        kappa_tail_hi: 1.0 / s2,
        kappa_n_hi: (s[0] / s2).powi(2),
    })
}

/// Intermediate quantities of the structured elimination on `κI − M`.
#[derive(Debug, Clone)]
pub struct EliminationTableau {
    /// Reduced matrix: rows `2..n−1` carry `a_i1, a_ii, a_in`, row `n`
    /// carries `a_n1, a_nn` (zero-based rows `1..n−2` and `n−1`).
    pub reduced: DMatrix<f64>,
    /// Unnormalised kernel vector with first component one.
    pub d: DVector<f64>,
}

fn pivot_check(step: u8, pivot: f64, scale: f64) -> Result<()> {
    if !(pivot.abs() > PIVOT_REL_TOL * scale) {
        return Err(Error::EliminationDegenerate { step, pivot });
    }
    Ok(())
}

/// Four-step structured elimination on `K = κ_n I − M`.
///
/// 1. For `i < n`, subtract `(s_i/s_n)·row_n` from `row_i`, which removes the
///    rank-one part `s sᵀ/σ₂²` from every row but the last.
/// 2. Rescale those rows by `s_n`.
/// 3. For `2 ≤ i ≤ n−1`, subtract `((s_n − s_i)/(s_n − s_1))·row_1`, leaving
///    non-zeros only in columns `1`, `i`, `n`.
/// 4. Clear columns `2..n−1` of `row_n` with the pivots `a_ii`.
///
/// Here `s_i = σ₁(η|i)`. The surviving entries give the kernel vector
/// `d = (1, d_2, …, d_{n−1}, −a_n1/a_nn)` with
/// `d_i = (a_in a_n1 − a_i1 a_nn)/(a_ii a_nn)`.
pub fn elimination_tableau(eta: &Spectrum, kappa_n: f64) -> Result<EliminationTableau> {
    let m = assemble(eta)?;
    let n = m.n();
    let s = &m.sigma1_excl;
    let last = n - 1;
    let k_orig = DMatrix::from_fn(n, n, |i, k| if i == k { kappa_n } else { 0.0 }) - &m.entries;
    let scale = m.entries.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let s_scale = s.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut k = k_orig.clone();

    pivot_check(1, s[last], s_scale)?;
    for i in 0..last {
        let r = s[i] / s[last];
        for c in 0..n {
            let v = k[(last, c)];
            k[(i, c)] -= r * v;
        }
    }
    for i in 0..last {
        for c in 0..n {
            k[(i, c)] *= s[last];
        }
    }
    if n > 2 {
        let denom = s[last] - s[0];
        pivot_check(3, denom, s_scale)?;
        for i in 1..last {
            let r = (s[last] - s[i]) / denom;
            for c in 0..n {
                let v = k[(0, c)];
                k[(i, c)] -= r * v;
            }
            // columns other than 0, i, n−1 cancel exactly
            for c in 1..last {
                if c != i {
                    k[(i, c)] = 0.0;
                }
            }
        }
    }
    let row_scale = scale * s_scale.max(1.0);
    for i in 1..last {
        pivot_check(4, k[(i, i)], row_scale)?;
        let f = k_orig[(last, i)] / k[(i, i)];
        for c in 0..n {
            let v = k[(i, c)];
            k[(last, c)] -= f * v;
        }
        k[(last, i)] = 0.0;
    }
    let a_n1 = k[(last, 0)];
    let a_nn = k[(last, last)];
    pivot_check(4, a_nn, scale)?;
    let mut d = DVector::<f64>::zeros(n);
    d[0] = 1.0;
    d[last] = -a_n1 / a_nn;
    for i in 1..last {
        d[i] = (k[(i, last)] * a_n1 - k[(i, 0)] * a_nn) / (k[(i, i)] * a_nn);
    }
    Ok(EliminationTableau { reduced: k, d })
}

/// Unnormalised bottom eigenvector of `M` by the structured elimination.
pub fn min_eigvec_elimination(eta: &Spectrum, kappa_n: f64) -> Result<DVector<f64>> {
    Ok(elimination_tableau(eta, kappa_n)?.d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMethod {
    Structured,
    GenericPivoting,
}

/// Structured elimination with a fallback to complete-pivot kernel extraction
/// when a structured pivot degenerates.
pub fn min_eigvec(eta: &Spectrum, kappa_n: f64) -> Result<(DVector<f64>, KernelMethod)> {
    match min_eigvec_elimination(eta, kappa_n) {
        Ok(d) => Ok((d, KernelMethod::Structured)),
        Err(Error::EliminationDegenerate { .. }) => {
            let m = assemble(eta)?;
            let n = m.n();
            let k = &m.entries - DMatrix::from_diagonal_element(n, n, kappa_n);
            Ok((linalg::kernel_vector(&k, 1e-9)?, KernelMethod::GenericPivoting))
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProfileRow {
    pub t: f64,
    /// `t² κ_n`.
    pub scaled_kappa_n: f64,
    /// `t² Σ_{i≥2} |ξ_n^i|²`.
    pub scaled_tail_mass: f64,
    pub kappa_n_minus_1: f64,
    /// `σ₂(η(t))`; for `n ≥ 3` the middle eigenvalues equal `1/σ₂` exactly.
    pub sigma2: f64,
}

/// Spectral data of `M` along `η(t) = (t, tail)` for each `t` in `t_grid`.
pub fn tail_decay_profile(tail: &Spectrum, t_grid: &[f64]) -> Result<Vec<ProfileRow>> {
    let top = tail.values()[0];
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("t grid must be strictly increasing".into()));
    }
    t_grid
        .iter()
        .map(|&t| {
            if !(t >= top) {
                return Err(Error::InvalidArgument(format!("t = {t} is below the tail maximum {top}")));
            }
            let mut v = vec![t];
            v.extend_from_slice(tail.values());
            let eta = Spectrum::new(v)?;
            let spec = spectral(&assemble(&eta)?)?;
            let n = eta.len();
            let xi = spec.xis.column(n - 1);
            let mass: f64 = xi.iter().skip(1).map(|x| x * x).sum();
            Ok(ProfileRow {
                t,
                scaled_kappa_n: t * t * spec.kappas[n - 1],
                scaled_tail_mass: t * t * mass,
                kappa_n_minus_1: spec.kappas[n - 2],
                sigma2: crate::symfun::sigma2(eta.values()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symfun::{log_sigma2_jet, sample_gamma_k};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sp(v: &[f64]) -> Spectrum {
        Spectrum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn assemble_examples() {
        let m = assemble(&sp(&[1.0, 1.0, 1.0])).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                let want = if i == k { 4.0 / 9.0 } else { 1.0 / 9.0 };
                assert_relative_eq!(m.entries[(i, k)], want, epsilon = 1e-15);
            }
        }
        let m = assemble(&sp(&[3.0, 2.0, 1.0])).unwrap();
        assert_relative_eq!(m.entries[(0, 0)], (3.0f64 / 11.0).powi(2), epsilon = 1e-15);
        assert!(m.entries == m.entries.transpose());
    }

    #[test]
    fn quad_form_examples() {
        let eta = sp(&[1.0, 1.0, 1.0]);
        let id = DMatrix::<Complex64>::identity(3, 3);
        assert_relative_eq!(quad_form(&eta, &id).unwrap(), 2.0, epsilon = 1e-14);
        assert_eq!(quad_form(&eta, &DMatrix::zeros(3, 3)).unwrap(), 0.0);
        let mut bad = DMatrix::<Complex64>::zeros(3, 3);
        bad[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(quad_form(&eta, &bad).is_err());
    }

    #[test]
    fn quad_form_is_second_variation() {
        // −d²/dt² log σ₂(spec(diag η + tP)) at t = 0, by central differences
        // on the characteristic polynomial coefficients of a Hermitian matrix.
        let eta = sp(&[2.0, 0.7, -0.3]);
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let p = DMatrix::from_row_slice(
            3,
            3,
            &[c(0.3, 0.0), c(0.2, 0.5), c(-0.4, 0.1), c(0.2, -0.5), c(-0.7, 0.0), c(0.3, 0.3), c(-0.4, -0.1), c(0.3, -0.3), c(0.1, 0.0)],
        );
        let sigma2_of = |t: f64| {
            let a = DMatrix::from_fn(3, 3, |i, k| {
                let base = if i == k { eta.values()[i] } else { 0.0 };
                c(base, 0.0) + p[(i, k)] * t
            });
            let tr = a.trace().re;
            let fro: f64 = a.iter().map(|z| z.norm_sqr()).sum();
            0.5 * (tr * tr - fro)
        };
        let h = 1e-4;
        let fd = -(sigma2_of(h).ln() - 2.0 * sigma2_of(0.0).ln() + sigma2_of(-h).ln()) / (h * h);
        assert_relative_eq!(quad_form(&eta, &p).unwrap(), fd, max_relative = 1e-6);
    }

    #[test]
    fn det_examples() {
        let (det, pred) = det_identity(&sp(&[1.0, 1.0, 1.0])).unwrap();
        assert_relative_eq!(det, 2.0 / 27.0, epsilon = 1e-15);
        assert_relative_eq!(pred, 2.0 / 27.0, epsilon = 1e-15);
        let (det, pred) = det_identity(&sp(&[1.0, 1.0])).unwrap();
        assert_relative_eq!(det, 1.0, epsilon = 1e-15);
        assert_eq!(pred, 1.0);
        let (det, pred) = det_identity_f64(&sp(&[1.0, 1.0, 1.0])).unwrap();
        assert_relative_eq!(det, pred, max_relative = 1e-14);
    }

    #[test]
    fn kappa_product_is_determinant() {
        for v in [[1.0, 1.0, 1.0, 1.0], [3.0, 2.0, 1.0, 0.5], [5.0, 1.0, 0.2, -0.1]] {
            let eta = sp(&v);
            let spec = spectral(&assemble(&eta).unwrap()).unwrap();
            let prod: f64 = spec.kappas.iter().product();
            let (det, _) = det_identity(&eta).unwrap();
            assert_relative_eq!(prod, det, max_relative = 1e-9);
        }
    }

    #[test]
    fn split_at_all_ones() {
        let d = split_determinants(&sp(&[1.0, 1.0])).unwrap();
        assert_relative_eq!(d.sum_det_a, 2.0, epsilon = 1e-15);
        assert_relative_eq!(d.det_m2, -1.0, epsilon = 1e-15);
        assert_relative_eq!(d.recombined, d.det_m1_minus_m2, epsilon = 1e-14);
    }

    #[test]
    fn spectral_at_all_ones() {
        let sp3 = spectral(&assemble(&sp(&[1.0, 1.0, 1.0])).unwrap()).unwrap();
        assert_relative_eq!(sp3.kappas[0], 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(sp3.kappas[1], 1.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(sp3.kappas[2], 1.0 / 3.0, epsilon = 1e-14);
        assert_eq!(sp3.clusters, vec![vec![0], vec![1, 2]]);
        assert!(sp3.is_simple(0) && !sp3.is_simple(2));
    }

    #[test]
    fn weyl_at_all_ones() {
        let w = weyl_envelope(&sp(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(w.a1, 12.0);
        assert_relative_eq!(w.kappa1_lo, 6.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(w.kappa1_hi, 15.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(w.kappa_tail_hi, 1.0 / 3.0, epsilon = 1e-15);
        assert!(w.contains(&[2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 1e-14));
    }

    #[test]
    fn elimination_degenerates_at_symmetric_point() {
        let eta = sp(&[1.0, 1.0, 1.0]);
        assert!(matches!(
            min_eigvec_elimination(&eta, 1.0 / 3.0),
            Err(Error::EliminationDegenerate { .. })
        ));
        let (d, method) = min_eigvec(&eta, 1.0 / 3.0).unwrap();
        assert_eq!(method, KernelMethod::GenericPivoting);
        let m = assemble(&eta).unwrap();
        assert!((&m.entries * &d - &d / 3.0).norm() <= 1e-9);
    }

    #[test]
    fn elimination_residual_n4() {
        let eta = sp(&[10.0, 1.0, 0.5, 0.4]);
        let m = assemble(&eta).unwrap();
        let spec = spectral(&m).unwrap();
        let d = min_eigvec_elimination(&eta, spec.kappas[3]).unwrap();
        let r = &m.entries * &d - &d * spec.kappas[3];
        assert!(r.norm() <= 1e-8 * d.norm());
    }

    #[test]
    fn elimination_matches_closed_forms_n4() {
        let eta = sp(&[4.0, 2.5, 1.0, -0.3]);
        let m = assemble(&eta).unwrap();
        let kappa = spectral(&m).unwrap().kappas[3];
        let tab = elimination_tableau(&eta, kappa).unwrap();
        let s = &m.sigma1_excl;
        let s2 = m.sigma2;
        let a = &tab.reduced;
        for i in 1..3 {
            let r = (s[3] - s[i]) / (s[3] - s[0]);
            let a_ii = s[3] * kappa - s[3] / s2;
            let a_i1 = (s[3] - s[i]) / s2 - r * (s[3] * s2 * kappa - s[0]) / s2;
            let a_i4 = s[3] / s2 - s[i] * kappa - r * (s[3] - s[0] * s2 * kappa) / s2;
            assert_relative_eq!(a[(i, i)], a_ii, max_relative = 1e-10);
            assert_relative_eq!(a[(i, 0)], a_i1, max_relative = 1e-10);
            assert_relative_eq!(a[(i, 3)], a_i4, max_relative = 1e-10);
        }
        let couple = |i: usize| (s2 - s[i] * s[3]) / (s2 * s2 * a[(i, i)]);
        let a41 = (s2 - s[0] * s[3]) / (s2 * s2) - (1..3).map(|i| couple(i) * a[(i, 0)]).sum::<f64>();
        let a44 = kappa - (s[3] / s2).powi(2) - (1..3).map(|i| couple(i) * a[(i, 3)]).sum::<f64>();
        assert_relative_eq!(a[(3, 0)], a41, max_relative = 1e-9);
        assert_relative_eq!(a[(3, 3)], a44, max_relative = 1e-9);
        let d = &tab.d;
        assert_eq!(d[0], 1.0);
        assert_relative_eq!(d[3], -a[(3, 0)] / a[(3, 3)], max_relative = 1e-14);
        for i in 1..3 {
            let want = (a[(i, 3)] * a[(3, 0)] - a[(i, 0)] * a[(3, 3)]) / (a[(i, i)] * a[(3, 3)]);
            assert_relative_eq!(d[i], want, max_relative = 1e-14);
        }
    }

    #[test]
    fn profile_all_ones_tail() {
        let rows = tail_decay_profile(&sp(&[1.0, 1.0]), &[10.0, 100.0, 1000.0]).unwrap();
        let ks: Vec<f64> = rows.iter().map(|r| r.scaled_kappa_n).collect();
        let hi = ks.iter().cloned().fold(f64::MIN, f64::max);
        let lo = ks.iter().cloned().fold(f64::MAX, f64::min);
        assert!(lo > 0.0 && hi / lo <= 10.0);
        // equal tail entries: the tail mass decays faster than t⁻², so only
        // the upper bound survives
        let mass: Vec<f64> = rows.iter().map(|r| r.scaled_tail_mass).collect();
        assert!(mass.windows(2).all(|w| w[1] <= w[0]));
        for r in &rows {
            assert_relative_eq!(r.kappa_n_minus_1 * r.sigma2, 1.0, max_relative = 1e-9);
        }
        assert!(tail_decay_profile(&sp(&[1.0, 1.0]), &[0.5]).is_err());
    }

    fn gamma2() -> impl Strategy<Value = Spectrum> {
        (2usize..=8, any::<u64>()).prop_map(|(n, seed)| sample_gamma_k(n, 2, 1, seed).unwrap().remove(0))
    }

    proptest! {
        #[test]
        fn matrix_is_negated_jet(eta in gamma2()) {
            let m = assemble(&eta).unwrap();
            let jet = log_sigma2_jet(&eta).unwrap();
            let scale = jet.hess_diag.amax();
            prop_assert!((&m.entries + &jet.hess_diag).amax() <= 1e-13 * scale);
        }

        #[test]
        fn spectrum_is_consistent(eta in gamma2()) {
            let m = assemble(&eta).unwrap();
            let spec = spectral(&m).unwrap();
            let norm = linalg::frobenius(&m.entries);
            for i in 0..m.n() {
                let xi = spec.xi(i);
                prop_assert!((&m.entries * &xi - &xi * spec.kappas[i]).norm() <= 1e-10 * norm);
            }
            let gram = spec.xis.transpose() * &spec.xis;
            prop_assert!((gram - DMatrix::identity(m.n(), m.n())).amax() <= 1e-10);
            prop_assert!(spec.kappas[m.n() - 1] > 0.0);
            let w = weyl_envelope(&eta).unwrap();
            prop_assert!(w.contains(&spec.kappas, 1e-12 * norm));
        }

        #[test]
        fn quad_form_nonnegative(eta in gamma2(), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let n = eta.len();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut p = DMatrix::<Complex64>::zeros(n, n);
            for i in 0..n {
                p[(i, i)] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
                for k in i + 1..n {
                    let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    p[(i, k)] = z;
                    p[(k, i)] = z.conj();
                }
            }
            prop_assert!(quad_form(&eta, &p).unwrap() >= -1e-10);
        }
    }
}
