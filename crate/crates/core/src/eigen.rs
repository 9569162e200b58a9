//! Dense Hermitian eigensolvers.
//!
//! [`hermitian_eigenvalues`] reduces the matrix to real symmetric tridiagonal
//! form with complex Householder reflectors and finishes with implicit-shift QL.
//! [`jacobi_eigh`] is a cyclic complex Jacobi method that also returns
//! eigenvectors; it is slower and serves as the independent second route.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::matrix::HermitianMatrix;
use crate::scalar::{Cx, Scalar};

const QL_MAX_ITER: usize = 64;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues<T: Scalar>(a: &HermitianMatrix<T>) -> Result<Vec<T>> {
    let n = a.n();
    if n == 0 {
        return Err(Error::Empty);
    }
    let (mut d, mut e) = tridiagonalize(a);
    tridiagonal_ql(&mut d, &mut e)?;
    d.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    Ok(d)
}

/// Largest absolute eigenvalue, i.e. the operator norm of a Hermitian matrix.
pub fn hermitian_op_norm<T: Scalar>(a: &HermitianMatrix<T>) -> Result<T> {
    let ev = hermitian_eigenvalues(a)?;
    Ok(ev[0].abs().max(ev[ev.len() - 1].abs()))
}

/// Householder reduction `Q^H A Q = T`; returns the diagonal and the moduli of
/// the off-diagonal (`e[k]` couples `k` and `k+1`, `e[n-1] = 0`). Phases of the
/// complex off-diagonal are dropped, which is a diagonal unitary similarity.
fn tridiagonalize<T: Scalar>(a: &HermitianMatrix<T>) -> (Vec<T>, Vec<T>) {
    let n = a.n();
    let zero = Complex::new(T::zero(), T::zero());
    let mut m: Vec<Cx<T>> = a.as_slice().to_vec();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    let mut v = vec![zero; n];
    let mut p = vec![zero; n];

    for k in 0..n.saturating_sub(2) {
        let lo = k + 1;
        let len = n - lo;
        let xnorm = (lo..n).map(|i| m[i * n + k].norm_sqr()).sum::<T>().sqrt();
        d[k] = m[k * n + k].re;
        e[k] = xnorm;
        if xnorm == T::zero() {
            continue;
        }
        let x0 = m[lo * n + k];
        let phase = if x0.norm() > T::zero() {
            x0 / x0.norm()
        } else {
            Complex::new(T::one(), T::zero())
        };
        let alpha = -phase * xnorm;
        for i in 0..len {
            v[i] = m[(lo + i) * n + k];
        }
        v[0] -= alpha;
        let vhv = v[..len].iter().map(|x| x.norm_sqr()).sum::<T>();
        if vhv == T::zero() {
            continue;
        }
        let tau = T::two() / vhv;

        // p = tau B v over the trailing block
        for i in 0..len {
            let row = &m[(lo + i) * n + lo..(lo + i) * n + n];
            let s = row
                .iter()
                .zip(&v[..len])
                .fold(zero, |acc, (b, x)| acc + b * x);
            p[i] = s * tau;
        }
        let kk = v[..len]
            .iter()
            .zip(&p[..len])
            .fold(zero, |acc, (x, y)| acc + x.conj() * y)
            .re
            * tau
            / T::two();
        for i in 0..len {
            p[i] -= v[i] * kk;
        }
        // B -= v q^H + q v^H
        for i in 0..len {
            let vi = v[i];
            let qi = p[i];
            let row = &mut m[(lo + i) * n + lo..(lo + i) * n + n];
            for (jj, b) in row.iter_mut().enumerate() {
                *b -= vi * p[jj].conj() + qi * v[jj].conj();
            }
        }
        for i in 0..len {
            m[(lo + i) * n + k] = if i == 0 { alpha } else { zero };
            m[k * n + lo + i] = m[(lo + i) * n + k].conj();
        }
    }
    if n >= 2 {
        d[n - 2] = m[(n - 2) * n + n - 2].re;
        e[n - 2] = m[(n - 1) * n + n - 2].norm();
    }
    d[n - 1] = m[(n - 1) * n + n - 1].re;
    e[n - 1] = T::zero();
    (d, e)
}

/// Implicit-shift QL on a symmetric tridiagonal matrix (eigenvalues only).
fn tridiagonal_ql<T: Scalar>(d: &mut [T], e: &mut [T]) -> Result<()> {
    let n = d.len();
    let eps = T::epsilon();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_ITER {
                return Err(Error::EigenNoConvergence {
                    iterations: iter,
                    residual: e[l].abs().to_f64_lossy(),
                    best: Vec::new(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (T::two() * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + T::two() * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

/// Full eigendecomposition: ascending eigenvalues and the matching
/// orthonormal eigenvectors (as columns, stored one `Vec` per eigenvector).
#[derive(Debug, Clone)]
pub struct Eigh<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<Cx<T>>>,
    pub sweeps: usize,
}

/// Cyclic Jacobi. Stops once the off-diagonal Frobenius norm is at most
/// `tol · ‖A‖_F`.
pub fn jacobi_eigh<T: Scalar>(a: &HermitianMatrix<T>, tol: T) -> Result<Eigh<T>> {
    let n = a.n();
    if n == 0 {
        return Err(Error::Empty);
    }
    let zero = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let mut m: Vec<Cx<T>> = a.as_slice().to_vec();
    let mut v = vec![zero; n * n];
    for j in 0..n {
        v[j * n + j] = one;
    }
    let target = tol * a.frobenius_norm();
    let off = |m: &[Cx<T>]| -> T {
        let mut s = T::zero();
        for j in 0..n {
            for l in 0..n {
                if j != l {
                    s += m[j * n + l].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off(&m) > target {
        if sweeps >= JACOBI_MAX_SWEEPS {
            return Err(Error::EigenNoConvergence {
                iterations: sweeps,
                residual: off(&m).to_f64_lossy(),
                best: Vec::new(),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let b = m[p * n + q];
                let bn = b.norm();
                if bn == T::zero() {
                    continue;
                }
                let app = m[p * n + p].re;
                let aqq = m[q * n + q].re;
                let ph = b / bn; // e^{iφ}
                let theta = (aqq - app) / (T::two() * bn);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let t = if theta == T::zero() { T::one() } else { t };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                let ph_c = ph.conj();
                // columns: U = [[c, s], [-s e^{-iφ}, c e^{-iφ}]]
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = mkp * c - mkq * ph_c * s;
                    m[k * n + q] = mkp * s + mkq * ph_c * c;
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * c - vkq * ph_c * s;
                    v[k * n + q] = vkp * s + vkq * ph_c * c;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = mpk * c - mqk * ph * s;
                    m[q * n + k] = mpk * s + mqk * ph * c;
                }
                m[p * n + p] = Complex::new(app - t * bn, T::zero());
                m[q * n + q] = Complex::new(aqq + t * bn, T::zero());
                m[p * n + q] = zero;
                m[q * n + p] = zero;
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[i * n + i]
            .re
            .partial_cmp(&m[j * n + j].re)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(Eigh {
        values: order.iter().map(|&i| m[i * n + i].re).collect(),
        vectors: order
            .iter()
            .map(|&i| (0..n).map(|k| v[k * n + i]).collect())
            .collect(),
        sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::norm2;

    fn c(re: f64, im: f64) -> Cx<f64> {
        Complex::new(re, im)
    }

    fn test_matrix(n: usize) -> HermitianMatrix<f64> {
        HermitianMatrix::from_upper(n, |j, l| {
            let x = (j * 7 + l * 13) as f64;
            c(
                (x * 0.37).sin(),
                if j == l { 0.0 } else { (x * 0.11).cos() },
            )
        })
    }

    #[test]
    fn two_by_two_known_spectrum() {
        let a =
            HermitianMatrix::from_upper(2, |j, l| if j == l { c(0.0, 0.0) } else { c(3.0, 0.0) });
        let ev = hermitian_eigenvalues(&a).unwrap();
        assert!((ev[0] + 3.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
        let ones = HermitianMatrix::from_upper(2, |_, _| c(1.0, 0.0));
        let ev = hermitian_eigenvalues(&ones).unwrap();
        assert!(ev[0].abs() < 1e-15 && (ev[1] - 2.0).abs() < 1e-15);
        let j = jacobi_eigh(&ones, 1e-14).unwrap();
        assert!((j.values[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn ql_and_jacobi_agree() {
        for n in [1, 2, 3, 5, 17, 40] {
            let a = test_matrix(n);
            let ql = hermitian_eigenvalues(&a).unwrap();
            let jac = jacobi_eigh(&a, 1e-13).unwrap();
            for (x, y) in ql.iter().zip(&jac.values) {
                assert!(
                    (x - y).abs() < 1e-10 * (1.0 + a.frobenius_norm()),
                    "n={n}: {x} vs {y}"
                );
            }
        }
    }

    #[test]
    fn jacobi_vectors_are_eigenvectors() {
        let a = test_matrix(12);
        let eig = jacobi_eigh(&a, 1e-13).unwrap();
        for (lam, vec) in eig.values.iter().zip(&eig.vectors) {
            let av = a.matvec(vec).unwrap();
            let r: Vec<_> = av.iter().zip(vec).map(|(x, y)| x - y * *lam).collect();
            assert!(norm2(&r) < 1e-10);
            assert!((norm2(vec) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_is_preserved() {
        let a = test_matrix(30);
        let ev = hermitian_eigenvalues(&a).unwrap();
        let tr: f64 = a.diagonal().iter().sum();
        assert!((ev.iter().sum::<f64>() - tr).abs() < 1e-10);
    }

    #[test]
    fn diagonal_and_zero_matrices() {
        let z = HermitianMatrix::<f64>::zeros(4);
        assert_eq!(hermitian_eigenvalues(&z).unwrap(), vec![0.0; 4]);
        let d = HermitianMatrix::from_real_upper(
            3,
            |j, l| if j == l { [3.0, -1.0, 2.0][j] } else { 0.0 },
        );
        assert_eq!(hermitian_eigenvalues(&d).unwrap(), vec![-1.0, 2.0, 3.0]);
        assert_eq!(hermitian_op_norm(&d).unwrap(), 3.0);
    }
}
