//! Small dense kernels shared by the spectral modules: cyclic Jacobi for real
//! symmetric and complex Hermitian matrices, and kernel extraction by
//! complete-pivot elimination.
//!
//! All routines are deterministic: fixed cyclic sweep order (row-major over the
//! strict upper triangle), eigenpairs sorted by descending eigenvalue, and a
//! sign (phase) convention that makes the first non-negligible component of
//! every eigenvector real and positive.

use nalgebra::DMatrix;
use num_complex::Complex64;
use twofloat::TwoFloat;

use crate::error::{Error, Result};

/// Sweep budget for the cyclic Jacobi iterations.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Convergence threshold: off-diagonal Frobenius mass relative to `‖M‖_F`.
pub const JACOBI_REL_TOL: f64 = 1e-14;

/// Components below this fraction of the vector's largest entry are skipped
/// when fixing the sign convention.
const SIGN_EPS: f64 = 1e-10;

/// Descending eigen-decomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: DMatrix<f64>,
}

/// Descending eigen-decomposition of a complex Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEigen {
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`; the matrix is unitary.
    pub vectors: DMatrix<Complex64>,
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn off_diag_mass(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigen-decomposition of a real symmetric matrix.
pub fn jacobi_symmetric(m: &DMatrix<f64>) -> Result<SymEigen> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::InvalidArgument("matrix is not square".into()));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let norm = frobenius(m);
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let mut sweeps = 0;
    while norm > 0.0 {
        let off = off_diag_mass(&a);
        if off <= JACOBI_REL_TOL * norm {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- Gᵀ A G with G = [[c, s], [-s, c]] acting on (p, q).
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut vec = v.column(i).clone_owned();
        let amax = vec.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if let Some(first) = vec.iter().find(|x| x.abs() > SIGN_EPS * amax) {
            if *first < 0.0 {
                vec.neg_mut();
            }
        }
        vectors.set_column(col, &vec);
    }
    Ok(SymEigen { values, vectors })
}

fn herm_off_mass(a: &DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigen-decomposition of a complex Hermitian matrix.
///
/// Each rotation first removes the phase of `a_pq` with a diagonal unitary,
/// then applies the real rotation to the resulting real symmetric 2×2 block.
pub fn jacobi_hermitian(m: &DMatrix<Complex64>) -> Result<HermEigen> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::InvalidArgument("matrix is not square".into()));
    }
    let norm = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let mut a = m.clone();
    // Hermitian input; force an exactly real diagonal.
    for i in 0..n {
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
    }
    let mut v = DMatrix::<Complex64>::identity(n, n);
    let mut sweeps = 0;
    if norm > 0.0 {
        loop {
            let off = herm_off_mass(&a);
            if off <= JACOBI_REL_TOL * norm {
                break;
            }
            if sweeps == JACOBI_MAX_SWEEPS {
                return Err(Error::NoConvergence { sweeps, off });
            }
            sweeps += 1;
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    let r = apq.norm();
                    if r == 0.0 {
                        continue;
                    }
                    let phase = apq / r; // e^{iφ}
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let theta = (aqq - app) / (2.0 * r);
                    let t = if theta.is_infinite() {
                        0.5 / theta
                    } else {
                        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    // G = diag(1, e^{-iφ}) · [[c, s], [-s, c]]
                    let g_pp = Complex64::new(c, 0.0);
                    let g_pq = Complex64::new(s, 0.0);
                    let g_qp = -phase.conj() * s;
                    let g_qq = phase.conj() * c;
                    // A <- A G
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = akp * g_pp + akq * g_qp;
                        a[(k, q)] = akp * g_pq + akq * g_qq;
                    }
                    // A <- Gᴴ A
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                        a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                    }
                    a[(p, q)] = Complex64::new(0.0, 0.0);
                    a[(q, p)] = Complex64::new(0.0, 0.0);
                    a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                    a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * g_pp + vkq * g_qp;
                        v[(k, q)] = vkp * g_pq + vkq * g_qq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut vec = v.column(i).clone_owned();
        let amax = vec.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if let Some(first) = vec.iter().find(|z| z.norm() > SIGN_EPS * amax).copied() {
            let unphase = first.conj() / first.norm();
            vec.iter_mut().for_each(|z| *z *= unphase);
        }
        vectors.set_column(col, &vec);
    }
    Ok(HermEigen { values, vectors })
}

/// Determinant by LU factorisation with partial pivoting.
pub fn determinant(m: &DMatrix<f64>) -> f64 {
    m.clone().lu().determinant()
}

/// Double-double quotient with one Newton correction.
///
/// `TwoFloat / TwoFloat` forms its reciprocal residual without a fused
/// multiply-add and so returns only a double-precision quotient.
pub fn dd_div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q0 = a.hi() / b.hi();
    let r = a - b * q0;
    let q1 = r.hi() / b.hi();
    let q = TwoFloat::new_add(q0, q1);
    let r2 = a - b * q;
    q + r2.hi() / b.hi()
}

/// Determinant of a row-major `n×n` double-double matrix by LU with partial
/// pivoting.
pub fn determinant_dd(n: usize, entries: &[TwoFloat]) -> TwoFloat {
    assert_eq!(entries.len(), n * n, "matrix storage does not match n");
    let mut a = entries.to_vec();
    let mut det = TwoFloat::from(1.0);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i * n + k].abs().partial_cmp(&a[j * n + k].abs()).unwrap().then(j.cmp(&i)))
            .unwrap();
        if a[p * n + k] == TwoFloat::from(0.0) {
            return TwoFloat::from(0.0);
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            det = -det;
        }
        let pivot = a[k * n + k];
        det *= pivot;
        for i in (k + 1)..n {
            let f = dd_div(a[i * n + k], pivot);
            for c in (k + 1)..n {
                let v = a[k * n + c];
                a[i * n + c] -= f * v;
            }
        }
    }
    det
}

/// A unit vector spanning (part of) the numerical kernel of `m`.
///
/// Gaussian elimination with complete pivoting; pivots below
/// `rel_tol · max|m_ij|` are treated as zero. The first free variable is set
/// to one, the remaining ones to zero, and the pivot variables are recovered
/// by back substitution.
pub fn kernel_vector(m: &DMatrix<f64>, rel_tol: f64) -> Result<nalgebra::DVector<f64>> {
    let n = m.nrows();
    if m.ncols() != n || n == 0 {
        return Err(Error::InvalidArgument("kernel extraction needs a square matrix".into()));
    }
    let scale = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let mut a = m.clone();
    let mut col_perm: Vec<usize> = (0..n).collect();
    let mut rank = 0;
    for k in 0..n {
        let mut best = (k, k, 0.0f64);
        for i in k..n {
            for j in k..n {
                if a[(i, j)].abs() > best.2 {
                    best = (i, j, a[(i, j)].abs());
                }
            }
        }
        if best.2 <= rel_tol * scale {
            break;
        }
        a.swap_rows(k, best.0);
        a.swap_columns(k, best.1);
        col_perm.swap(k, best.1);
        for i in (k + 1)..n {
            let f = a[(i, k)] / a[(k, k)];
            if f != 0.0 {
                for j in k..n {
                    let akj = a[(k, j)];
                    a[(i, j)] -= f * akj;
                }
            }
        }
        rank += 1;
    }
    if rank == n {
        // Full numerical rank: the smallest pivot is treated as zero.
        rank = n - 1;
    }
    let mut y = nalgebra::DVector::<f64>::zeros(n);
    y[rank] = 1.0;
    for k in (0..rank).rev() {
        let mut s = 0.0;
        for j in (k + 1)..n {
            s += a[(k, j)] * y[j];
        }
        y[k] = -s / a[(k, k)];
    }
    let mut x = nalgebra::DVector::<f64>::zeros(n);
    for (pos, &orig) in col_perm.iter().enumerate() {
        x[orig] = y[pos];
    }
    let norm = x.norm();
    Ok(x / norm)
}
