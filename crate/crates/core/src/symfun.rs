//! Elementary symmetric polynomials, Gårding cone tests, and the first and
//! second derivative jets of `log σ₂` at a diagonal point.
//!
//! Indices in this module are zero-based: entry `i` of a spectrum of length
//! `n` satisfies `0 ≤ i < n`, and `η[0]` is the largest eigenvalue.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rejection-sampling budget per returned spectrum.
pub const SAMPLE_BUDGET: u64 = 1_000_000;

/// Up to this length σ_k is evaluated by subset enumeration.
const ENUMERATION_MAX_N: usize = 12;

/// Eigenvalues `η₁ ≥ … ≥ η_n`, stored in descending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    /// Sorts `values` descending. Rejects empty input and non-finite entries.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("spectrum must be non-empty".into()));
        }
        if let Some(bad) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite spectrum entry {bad}")));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Spectrum { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The spectrum with entry `i` removed (still descending).
    pub fn without(&self, i: usize) -> Result<Spectrum> {
        if i >= self.len() || self.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "cannot delete entry {i} from a spectrum of length {}",
                self.len()
            )));
        }
        let mut v = self.values.clone();
        v.remove(i);
        Ok(Spectrum { values: v })
    }
}

impl TryFrom<Vec<f64>> for Spectrum {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Spectrum::new(v)
    }
}

impl From<Spectrum> for Vec<f64> {
    fn from(s: Spectrum) -> Self {
        s.values
    }
}

fn enumerate(values: &[f64], k: usize) -> f64 {
    let n = values.len();
    let mut total = 0.0;
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        total += idx.iter().map(|&j| values[j]).product::<f64>();
        // next k-combination in lexicographic order
        let mut pos = k;
        while pos > 0 {
            pos -= 1;
            if idx[pos] != pos + n - k {
                idx[pos] += 1;
                for q in pos + 1..k {
                    idx[q] = idx[q - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return total;
            }
        }
        if k == 0 {
            return total;
        }
    }
}

/// All of `σ₀ = 1, σ₁, …, σ_n` by the prefix recurrence
/// `σ_j(x₁..x_m) = σ_j(x₁..x_{m−1}) + x_m σ_{j−1}(x₁..x_{m−1})`.
pub fn sigma_all(values: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; values.len() + 1];
    e[0] = 1.0;
    for (m, &x) in values.iter().enumerate() {
        for j in (1..=m + 1).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

fn sigma_raw(values: &[f64], k: usize) -> f64 {
    if k == 0 {
        1.0
    } else if k > values.len() {
        0.0
    } else if values.len() <= ENUMERATION_MAX_N {
        enumerate(values, k)
    } else {
        sigma_all(values)[k]
    }
}

/// The k-th elementary symmetric polynomial, `1 ≤ k ≤ n`.
pub fn sigma_k(eta: &Spectrum, k: usize) -> Result<f64> {
    if k == 0 || k > eta.len() {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={}", eta.len())));
    }
    Ok(sigma_raw(eta.values(), k))
}

/// `σ_k(η|i)`: σ_k of η with entry `i` deleted; `1 ≤ k ≤ n−1`, `0 ≤ i < n`.
pub fn sigma_k_excluding(eta: &Spectrum, k: usize, i: usize) -> Result<f64> {
    let n = eta.len();
    if k == 0 || k + 1 > n {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={}", n.saturating_sub(1))));
    }
    if i >= n {
        return Err(Error::InvalidArgument(format!("index {i} outside 0..{n}")));
    }
    let mut rest = eta.values().to_vec();
    rest.remove(i);
    Ok(sigma_raw(&rest, k))
}

/// Strict cone membership: `σ_j(η) > 0` for every `j ≤ k`.
pub fn in_gamma_k(eta: &Spectrum, k: usize) -> Result<bool> {
    in_gamma_k_tol(eta, k, 0.0)
}

/// Membership with margin: `σ_j(η) > delta` for every `j ≤ k`.
pub fn in_gamma_k_tol(eta: &Spectrum, k: usize, delta: f64) -> Result<bool> {
    if k == 0 || k > eta.len() {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={}", eta.len())));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {delta} must be ≥ 0")));
    }
    let v = eta.values();
    if v.len() <= ENUMERATION_MAX_N {
        Ok((1..=k).all(|j| enumerate(v, j) > delta))
    } else {
        let all = sigma_all(v);
        Ok(all[1..=k].iter().all(|&s| s > delta))
    }
}

/// Seeded rejection sampling of `count` spectra in Γ_k from the uniform box
/// `[−1, n]ⁿ`.
pub fn sample_gamma_k(n: usize, k: usize, count: usize, seed: u64) -> Result<Vec<Spectrum>> {
    if n < 2 || k == 0 || k > n || count == 0 {
        return Err(Error::InvalidArgument(format!(
            "sampling needs n ≥ 2, 1 ≤ k ≤ n, count ≥ 1 (got n={n}, k={k}, count={count})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hi = n as f64;
    let mut out = Vec::with_capacity(count);
    let mut buf = vec![0.0; n];
    for _ in 0..count {
        let mut trials = 0u64;
        loop {
            if trials == SAMPLE_BUDGET {
                return Err(Error::SamplingFailure { budget: SAMPLE_BUDGET });
            }
            trials += 1;
            for x in buf.iter_mut() {
                *x = rng.gen_range(-1.0..hi);
            }
            let all = sigma_all(&buf);
            if all[1..=k].iter().all(|&s| s > 0.0) {
                out.push(Spectrum::new(buf.clone())?);
                break;
            }
        }
    }
    Ok(out)
}

pub(crate) fn sigma1(v: &[f64]) -> f64 {
    v.iter().sum()
}

pub(crate) fn sigma2(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            s += v[i] * v[j];
        }
    }
    s
}

/// `σ₁(η|i)` for every `i`, summed directly (no cancellation from `σ₁ − η_i`).
pub(crate) fn sigma1_excl_all(v: &[f64]) -> Vec<f64> {
    (0..v.len())
        .map(|i| v.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| x).sum())
        .collect()
}

/// Returns `(σ₁, σ₂)` or a cone-violation error when `σ₂ ≤ 0` or `σ₁ ≤ 0`.
pub(crate) fn check_gamma2(v: &[f64]) -> Result<(f64, f64)> {
    let s1 = sigma1(v);
    let s2 = sigma2(v);
    if !(s2 > 0.0 && s1 > 0.0) {
        return Err(Error::ConeViolation { sigma1: s1, sigma2: s2 });
    }
    Ok((s1, s2))
}

/// First and second derivatives of `log σ₂` in the eigenvalue variables.
#[derive(Debug, Clone)]
pub struct Sigma2Jet {
    pub sigma1: f64,
    pub sigma2: f64,
    /// `σ₁(η|i)`.
    pub sigma1_excl: Vec<f64>,
    /// `G^{iī} = σ₁(η|i)/σ₂`.
    pub grad: Vec<f64>,
    /// `G^{iī,kk̄}`.
    pub hess_diag: DMatrix<f64>,
    /// `G^{ik̄,kī} = −1/σ₂` for `i ≠ k`.
    pub offdiag_coeff: f64,
}

pub fn log_sigma2_jet(eta: &Spectrum) -> Result<Sigma2Jet> {
    let v = eta.values();
    let n = v.len();
    if n < 2 {
        return Err(Error::InvalidArgument("log σ₂ needs n ≥ 2".into()));
    }
    let (s1, s2) = check_gamma2(v)?;
    let excl = sigma1_excl_all(v);
    let grad: Vec<f64> = excl.iter().map(|e| e / s2).collect();
    let hess = DMatrix::from_fn(n, n, |i, k| {
        if i == k {
            -(grad[i] * grad[i])
        } else {
            1.0 / s2 - grad[i] * grad[k]
        }
    });
    Ok(Sigma2Jet {
        sigma1: s1,
        sigma2: s2,
        sigma1_excl: excl,
        grad,
        hess_diag: hess,
        offdiag_coeff: -1.0 / s2,
    })
}

/// Measured slack of the Maclaurin-type inequalities at a Γ₂ point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalitySlacks {
    /// `Σ G^{iī} − (2(n−1)/n) σ₂^{−1/2}`.
    pub maclaurin_sum_slack: f64,
    /// `η₁ σ₁(η|1) − (2/n) σ₂`.
    pub eta1_sigma1_slack: f64,
    /// `σ₁(η|1) σ₁(η) − σ₂`.
    pub sigma1_product_slack: f64,
    /// `min_{i≥2} G^{iī} / Σ_k G^{kk̄}`.
    pub min_grad_ratio: f64,
}

pub fn inequality_slacks(eta: &Spectrum) -> Result<InequalitySlacks> {
    let jet = log_sigma2_jet(eta)?;
    let v = eta.values();
    let n = v.len() as f64;
    let grad_sum: f64 = jet.grad.iter().sum();
    let min_tail = jet.grad[1..].iter().copied().fold(f64::INFINITY, f64::min);
    Ok(InequalitySlacks {
        maclaurin_sum_slack: grad_sum - 2.0 * (n - 1.0) / n / jet.sigma2.sqrt(),
        eta1_sigma1_slack: v[0] * jet.sigma1_excl[0] - 2.0 / n * jet.sigma2,
        sigma1_product_slack: jet.sigma1_excl[0] * jet.sigma1 - jet.sigma2,
        min_grad_ratio: min_tail / grad_sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sp(v: &[f64]) -> Spectrum {
        Spectrum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma_k(&sp(&[1.0, 1.0, 1.0]), 2).unwrap(), 3.0);
        assert_eq!(sigma_k(&sp(&[1.0, 0.0, 0.0]), 2).unwrap(), 0.0);
        assert_eq!(sigma_k(&sp(&[3.0, 2.0, 1.0]), 2).unwrap(), 11.0);
        assert!(sigma_k(&sp(&[3.0, 2.0, 1.0]), 4).is_err());
        assert!(sigma_k(&sp(&[3.0, 2.0, 1.0]), 0).is_err());
    }

    #[test]
    fn excluding_examples() {
        assert_eq!(sigma_k_excluding(&sp(&[1.0, 1.0, 1.0]), 1, 0).unwrap(), 2.0);
        assert_eq!(sigma_k_excluding(&sp(&[3.0, 2.0, 1.0]), 1, 1).unwrap(), 4.0);
        assert_eq!(sigma_k_excluding(&sp(&[3.0, 2.0, 1.0]), 2, 0).unwrap(), 2.0);
        assert!(sigma_k_excluding(&sp(&[3.0, 2.0, 1.0]), 3, 0).is_err());
        assert!(sigma_k_excluding(&sp(&[3.0, 2.0, 1.0]), 1, 3).is_err());
    }

    #[test]
    fn cone_examples() {
        assert!(in_gamma_k(&sp(&[1.0, 1.0, 1.0]), 2).unwrap());
        assert!(!in_gamma_k(&sp(&[2.0, -0.5]), 2).unwrap());
        assert!(in_gamma_k(&sp(&[3.0, 1.0, -0.5]), 2).unwrap());
        assert!(in_gamma_k_tol(&sp(&[3.0, 1.0, -0.5]), 2, 0.5).unwrap());
        assert!(!in_gamma_k_tol(&sp(&[3.0, 1.0, -0.5]), 2, 1.0).unwrap());
    }

    #[test]
    fn spectrum_sorts_and_rejects_nan() {
        assert_eq!(sp(&[1.0, 3.0, 2.0]).values(), &[3.0, 2.0, 1.0]);
        assert!(Spectrum::new(vec![1.0, f64::NAN]).is_err());
        assert!(Spectrum::new(vec![]).is_err());
        let s: Spectrum = serde_json::from_str("[0.5, 2.0]").unwrap();
        assert_eq!(s.values(), &[2.0, 0.5]);
    }

    #[test]
    fn sampling_is_reproducible_and_in_cone() {
        let a = sample_gamma_k(3, 2, 10, 7).unwrap();
        let b = sample_gamma_k(3, 2, 10, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|e| in_gamma_k(e, 2).unwrap()));
        for e in sample_gamma_k(2, 2, 100, 1).unwrap() {
            let v = e.values();
            assert!(v[0] * v[1] > 0.0 && v[0] + v[1] > 0.0);
        }
    }

    #[test]
    fn jet_at_all_ones() {
        let j = log_sigma2_jet(&sp(&[1.0, 1.0, 1.0])).unwrap();
        for g in &j.grad {
            assert_relative_eq!(*g, 2.0 / 3.0, epsilon = 1e-15);
        }
        for i in 0..3 {
            for k in 0..3 {
                let want = if i == k { -4.0 / 9.0 } else { -1.0 / 9.0 };
                assert_relative_eq!(j.hess_diag[(i, k)], want, epsilon = 1e-15);
            }
        }
        assert_relative_eq!(j.offdiag_coeff, -1.0 / 3.0, epsilon = 1e-15);
        assert!(matches!(log_sigma2_jet(&sp(&[2.0, -0.5])), Err(Error::ConeViolation { .. })));
    }

    #[test]
    fn slack_examples() {
        let s = inequality_slacks(&sp(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(s.eta1_sigma1_slack, 0.0);
        assert_relative_eq!(s.maclaurin_sum_slack, 2.0 - 4.0 / 3.0 / 3f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(s.sigma1_product_slack, 3.0, epsilon = 1e-14);
        let json = serde_json::to_value(s).unwrap();
        for key in ["maclaurin_sum_slack", "eta1_sigma1_slack", "sigma1_product_slack", "min_grad_ratio"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn recurrence_matches_enumeration_for_large_n() {
        let v: Vec<f64> = (0..14).map(|i| 0.3 + 0.1 * i as f64).collect();
        let all = sigma_all(&v);
        for k in 1..=14 {
            assert_relative_eq!(all[k], enumerate(&v, k), max_relative = 1e-12);
        }
    }

    fn gamma2() -> impl Strategy<Value = Spectrum> {
        (2usize..=8, any::<u64>()).prop_map(|(n, seed)| sample_gamma_k(n, 2, 1, seed).unwrap().remove(0))
    }

    proptest! {
        #[test]
        fn newton_recursion(v in prop::collection::vec(-3.0f64..3.0, 2..9), pick in any::<prop::sample::Index>()) {
            let eta = Spectrum::new(v).unwrap();
            let n = eta.len();
            let i = pick.index(n);
            for k in 1..n {
                let lhs = sigma_k(&eta, k).unwrap();
                let excl = sigma_k_excluding(&eta, k, i).unwrap();
                let excl_prev = if k == 1 { 1.0 } else { sigma_k_excluding(&eta, k - 1, i).unwrap() };
                let rhs = excl + eta.values()[i] * excl_prev;
                let scale = lhs.abs().max(excl.abs()).max((eta.values()[i] * excl_prev).abs()).max(1.0);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn sigma2_derivative(eta in gamma2(), pick in any::<prop::sample::Index>()) {
            let v = eta.values().to_vec();
            let i = pick.index(v.len());
            let h = 1e-5;
            let mut p = v.clone();
            let mut m = v.clone();
            p[i] += h;
            m[i] -= h;
            let fd = (sigma2(&p) - sigma2(&m)) / (2.0 * h);
            let want = sigma_k_excluding(&eta, 1, i).unwrap();
            prop_assert!((fd - want).abs() < 1e-7 * want.abs().max(1.0));
        }

        #[test]
        fn grad_matches_log_sigma2_difference(eta in gamma2(), pick in any::<prop::sample::Index>()) {
            let v = eta.values().to_vec();
            let i = pick.index(v.len());
            let jet = log_sigma2_jet(&eta).unwrap();
            let h = 1e-6 * jet.sigma2.sqrt();
            let mut p = v.clone();
            let mut m = v.clone();
            p[i] += h;
            m[i] -= h;
            let fd = (sigma2(&p).ln() - sigma2(&m).ln()) / (2.0 * h);
            prop_assert!((fd - jet.grad[i]).abs() < 1e-5 * jet.grad[i].abs().max(1.0));
        }

        #[test]
        fn slacks_nonnegative(eta in gamma2()) {
            let s = inequality_slacks(&eta).unwrap();
            prop_assert!(s.maclaurin_sum_slack >= -1e-12);
            prop_assert!(s.eta1_sigma1_slack >= -1e-12);
            prop_assert!(s.sigma1_product_slack >= -1e-12);
            prop_assert!(s.min_grad_ratio > 0.0);
        }

        #[test]
        fn cone_nesting(v in prop::collection::vec(-2.0f64..3.0, 1..8), k in 1usize..8) {
            let eta = Spectrum::new(v).unwrap();
            let k = k.min(eta.len());
            if in_gamma_k(&eta, k).unwrap() {
                for j in 1..k {
                    prop_assert!(in_gamma_k(&eta, j).unwrap());
                }
            }
        }
    }
}
