//! Top-eigenvalue calculus for real symmetric Hessians: the eigensystem, the
//! perturbed endomorphism `Φ = H − (I − V₁V₁ᵀ)` that splits a repeated top
//! eigenvalue, and the first and second derivatives of `λ₁`.
//!
//! Only the identity metric is handled, which is the situation at the centre
//! of normal coordinates.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// `λ₁` counts as simple when `λ₁ − λ₂ > SIMPLE_GAP_REL · max(‖H‖₂, 1e-300)`.
pub const SIMPLE_GAP_REL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct RealHessianEig {
    /// Descending eigenvalues `λ₁ ≥ … ≥ λ_{2n}`.
    pub lambdas: Vec<f64>,
    /// Column `α` is the unit eigenvector `V_{α+1}`.
    pub vees: DMatrix<f64>,
}

impl RealHessianEig {
    pub fn top_gap(&self) -> f64 {
        if self.lambdas.len() < 2 {
            return f64::INFINITY;
        }
        self.lambdas[0] - self.lambdas[1]
    }

    fn spectral_norm(&self) -> f64 {
        self.lambdas.iter().fold(0.0f64, |m, l| m.max(l.abs()))
    }

    fn require_simple(&self) -> Result<()> {
        let gap = self.top_gap();
        if !(gap > SIMPLE_GAP_REL * self.spectral_norm().max(1e-300)) {
            return Err(Error::Multiplicity { gap });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PerturbedEndo {
    /// `Φ = H − B`.
    pub phi: DMatrix<f64>,
    /// `B = I − V₁V₁ᵀ`.
    pub bee: DMatrix<f64>,
}

fn check_symmetric(h: &DMatrix<f64>, what: &str) -> Result<()> {
    if h.nrows() != h.ncols() {
        return Err(Error::InvalidArgument(format!("{what} is not square")));
    }
    let scale = h.amax().max(f64::MIN_POSITIVE);
    if (h - h.transpose()).amax() > 1e-12 * scale {
        return Err(Error::InvalidArgument(format!("{what} is not symmetric")));
    }
    Ok(())
}

pub fn real_hessian_eig(h: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<RealHessianEig> {
    check_symmetric(h, "Hessian")?;
    if g.shape() != h.shape() || g != &DMatrix::identity(h.nrows(), h.ncols()) {
        return Err(Error::UnsupportedMetric);
    }
    let e = linalg::jacobi_symmetric(h)?;
    Ok(RealHessianEig { lambdas: e.values, vees: e.vectors })
}

/// Eigensystem under the identity metric.
pub fn eig(h: &DMatrix<f64>) -> Result<RealHessianEig> {
    real_hessian_eig(h, &DMatrix::identity(h.nrows(), h.ncols()))
}

pub fn build_phi(eig: &RealHessianEig, h: &DMatrix<f64>) -> PerturbedEndo {
    let m = h.nrows();
    let v1 = eig.vees.column(0);
    let bee = DMatrix::identity(m, m) - v1 * v1.transpose();
    PerturbedEndo { phi: h - &bee, bee }
}

/// `∂λ₁/∂H_{αβ} = V₁^α V₁^β`.
pub fn d_lambda1(eig: &RealHessianEig) -> Result<DMatrix<f64>> {
    eig.require_simple()?;
    let v1 = eig.vees.column(0);
    Ok(v1 * v1.transpose())
}

/// Second derivative of `λ₁` along `t ↦ H + tE` at `t = 0`:
/// `Σ_{μ>1} 2(V₁ᵀ E V_μ)²/(λ₁ − λ_μ)`.
pub fn d2_lambda1_form(eig: &RealHessianEig, e: &DMatrix<f64>) -> Result<f64> {
    eig.require_simple()?;
    check_symmetric(e, "direction")?;
    if e.nrows() != eig.lambdas.len() {
        return Err(Error::InvalidArgument("direction has the wrong size".into()));
    }
    let v1 = eig.vees.column(0);
    let ev1 = e * v1;
    let l1 = eig.lambdas[0];
    let mut total = 0.0;
    for mu in 1..eig.lambdas.len() {
        let c = eig.vees.column(mu).dot(&ev1);
        total += 2.0 * c * c / (l1 - eig.lambdas[mu]);
    }
    Ok(total)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda1(h: &DMatrix<f64>) -> Result<f64> {
    Ok(linalg::jacobi_symmetric(h)?.values[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn m(r: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, r, v)
    }

    #[test]
    fn eig_examples() {
        let e = eig(&m(2, &[2.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(e.lambdas, vec![2.0, 1.0]);
        assert_eq!(e.vees.column(0).as_slice(), &[1.0, 0.0]);
        let e = eig(&DMatrix::zeros(4, 4)).unwrap();
        assert!(e.lambdas.iter().all(|&l| l == 0.0));
        let e = eig(&m(2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_relative_eq!(e.lambdas[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(e.lambdas[1], -1.0, epsilon = 1e-15);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(e.vees[(0, 0)], r, epsilon = 1e-15);
        assert_relative_eq!(e.vees[(1, 0)], r, epsilon = 1e-15);
    }

    #[test]
    fn rejects_metric_and_asymmetry() {
        let h = m(2, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(real_hessian_eig(&h, &(2.0 * &h)).unwrap_err(), Error::UnsupportedMetric);
        assert!(eig(&m(2, &[1.0, 2.0, 0.0, 1.0])).is_err());
    }

    #[test]
    fn phi_splits_repeated_top() {
        let h = m(2, &[2.0, 0.0, 0.0, 2.0]);
        let e = eig(&h).unwrap();
        assert!(d_lambda1(&e).is_err());
        let p = build_phi(&e, &h);
        let pe = eig(&p.phi).unwrap();
        assert_eq!(pe.lambdas, vec![2.0, 1.0]);

        let h = m(2, &[2.0, 0.0, 0.0, 1.0]);
        let pe = eig(&build_phi(&eig(&h).unwrap(), &h).phi).unwrap();
        assert_eq!(pe.lambdas, vec![2.0, 0.0]);
    }

    #[test]
    fn derivative_examples() {
        let e = eig(&m(2, &[2.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(d_lambda1(&e).unwrap(), m(2, &[1.0, 0.0, 0.0, 0.0]));
        let e = eig(&m(2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert!(d_lambda1(&e).unwrap().iter().all(|x| (x - 0.5).abs() < 1e-15));

        let e = eig(&m(2, &[2.0, 0.0, 0.0, 1.0])).unwrap();
        assert_relative_eq!(d2_lambda1_form(&e, &m(2, &[0.0, 1.0, 1.0, 0.0])).unwrap(), 2.0, epsilon = 1e-14);
        let v1 = e.vees.column(0);
        assert_eq!(d2_lambda1_form(&e, &(v1 * v1.transpose())).unwrap(), 0.0);
    }

    fn sym(size: usize) -> impl Strategy<Value = DMatrix<f64>> {
        prop::collection::vec(-1.0f64..1.0, size * size).prop_map(move |v| {
            let a = DMatrix::from_vec(size, size, v);
            (&a + a.transpose()) * 0.5
        })
    }

    proptest! {
        #[test]
        fn top_eigenvalue_properties(h in (2usize..=4).prop_flat_map(|n| sym(2 * n)), shift in 0.0f64..2.0) {
            let size = h.nrows();
            let mut h = h;
            let e0 = eig(&h).unwrap();
            let v = e0.vees.column(0).clone_owned();
            h += &v * v.transpose() * shift;
            let e = eig(&h).unwrap();
            let norm = h.norm();
            for a in 0..size {
                let col = e.vees.column(a);
                prop_assert!((&h * col - col * e.lambdas[a]).norm() <= 1e-10 * norm.max(1.0));
            }
            prop_assert!((e.vees.transpose() * &e.vees - DMatrix::identity(size, size)).amax() <= 1e-10);
            let d = d_lambda1(&e);
            if let Ok(d) = d {
                prop_assert!((d.trace() - 1.0).abs() < 1e-12);
            }
            // Φ keeps λ₁ and opens the top gap to at least min(gap, 1)
            let p = build_phi(&e, &h);
            let pe = eig(&p.phi).unwrap();
            prop_assert!((pe.lambdas[0] - e.lambdas[0]).abs() <= 1e-12 * norm.max(1.0));
            prop_assert!(pe.top_gap() >= e.top_gap().min(1.0) - 1e-12 * norm.max(1.0));
        }

        #[test]
        fn second_derivative_is_nonnegative(h in sym(6), ev in sym(6)) {
            let e = eig(&h).unwrap();
            if let Ok(v) = d2_lambda1_form(&e, &ev) {
                prop_assert!(v >= 0.0);
            }
        }
    }
}
