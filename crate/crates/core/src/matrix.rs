//! Dense Hermitian matrices.

use num_complex::Complex;

use crate::error::{check_dims, Error, Result};
use crate::scalar::{Cx, Scalar};

/// Dense, row-major Hermitian matrix.
///
/// Constructors only ever fill the upper triangle and mirror it, so
/// `a[(j, l)] == conj(a[(l, j)])` holds bit-for-bit and the diagonal is real.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix<T> {
    n: usize,
    data: Vec<Cx<T>>,
}

impl<T: Scalar> HermitianMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex::new(T::zero(), T::zero()); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for j in 0..n {
            m.data[j * n + j] = Complex::new(T::one(), T::zero());
        }
        m
    }

    /// Builds the matrix from its upper triangle (`j <= l`). The imaginary
    /// part of diagonal entries is discarded.
    pub fn from_upper(n: usize, mut entry: impl FnMut(usize, usize) -> Cx<T>) -> Self {
        let mut m = Self::zeros(n);
        for j in 0..n {
            let d = entry(j, j);
            m.data[j * n + j] = Complex::new(d.re, T::zero());
            for l in (j + 1)..n {
                let v = entry(j, l);
                m.data[j * n + l] = v;
                m.data[l * n + j] = v.conj();
            }
        }
        m
    }

    /// Real symmetric matrix from its upper triangle.
    pub fn from_real_upper(n: usize, mut entry: impl FnMut(usize, usize) -> T) -> Self {
        Self::from_upper(n, |j, l| Complex::new(entry(j, l), T::zero()))
    }

    /// Accepts a full row-major matrix after checking Hermitian symmetry to `tol`;
    /// the stored matrix is the mirrored upper triangle.
    pub fn from_full(n: usize, data: &[Cx<T>], tol: T) -> Result<Self> {
        check_dims(n * n, data.len())?;
        for j in 0..n {
            for l in j..n {
                if (data[j * n + l] - data[l * n + j].conj()).norm() > tol {
                    return Err(Error::NotHermitian { row: j, col: l });
                }
            }
        }
        Ok(Self::from_upper(n, |j, l| data[j * n + l]))
    }

    /// Rank-one matrix `z z^H`.
    pub fn outer(z: &[Cx<T>]) -> Self {
        Self::from_upper(z.len(), |j, l| z[j] * z[l].conj())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Cx<T>] {
        &self.data
    }

    pub fn row(&self, j: usize) -> &[Cx<T>] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    /// `self + s·other`
    pub fn add_scaled(&self, s: T, other: &Self) -> Result<Self> {
        check_dims(self.n, other.n)?;
        Ok(Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b * s)
                .collect(),
        })
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// `self + s·I`
    pub fn shift_diagonal(&self, s: T) -> Self {
        let mut out = self.clone();
        for j in 0..self.n {
            out.data[j * self.n + j].re += s;
        }
        out
    }

    pub fn matvec(&self, x: &[Cx<T>]) -> Result<Vec<Cx<T>>> {
        check_dims(self.n, x.len())?;
        Ok(self.matvec_unchecked(x))
    }

    pub(crate) fn matvec_unchecked(&self, x: &[Cx<T>]) -> Vec<Cx<T>> {
        (0..self.n)
            .map(|j| {
                self.row(j)
                    .iter()
                    .zip(x)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| {
                        acc + a * b
                    })
            })
            .collect()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|a| a.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|j| self.data[j * self.n + j].re).collect()
    }

    /// Largest deviation from exact Hermitian symmetry; zero for matrices built
    /// through this type's constructors.
    pub fn hermitian_defect(&self) -> T {
        let mut worst = T::zero();
        for j in 0..self.n {
            for l in j..self.n {
                let d = (self[(j, l)] - self[(l, j)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn cast<U: Scalar>(&self) -> HermitianMatrix<U> {
        HermitianMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .map(|a| Complex::new(U::of(a.re.to_f64_lossy()), U::of(a.im.to_f64_lossy())))
                .collect(),
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for HermitianMatrix<T> {
    type Output = Cx<T>;

    fn index(&self, (j, l): (usize, usize)) -> &Cx<T> {
        &self.data[j * self.n + l]
    }
}
