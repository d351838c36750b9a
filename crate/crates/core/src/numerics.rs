//! Dense complex linear algebra used by every solver.
//!
//! Matrices are stored column-major so that [`vec`] is a plain copy of the
//! backing buffer. Everything here is double precision.

use std::fmt;
use std::ops::{Deref, DerefMut, Index, IndexMut};

pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const J: C64 = C64 { re: 0.0, im: 1.0 };

/// Relative pivot threshold for [`hermitian_solve`].
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// A dense complex column vector.
#[derive(Clone, PartialEq, Default)]
pub struct ComplexVector(Vec<C64>);

impl ComplexVector {
    pub fn zeros(len: usize) -> Self {
        ComplexVector(vec![ZERO; len])
    }

    pub fn from_fn(len: usize, f: impl FnMut(usize) -> C64) -> Self {
        ComplexVector((0..len).map(f).collect())
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Hermitian inner product `selfᴴ · other`.
    pub fn dot(&self, other: &[C64]) -> C64 {
        dotc(&self.0, other)
    }

    pub fn scaled(&self, s: C64) -> Self {
        ComplexVector(self.0.iter().map(|z| z * s).collect())
    }

    pub fn conj(&self) -> Self {
        ComplexVector(self.0.iter().map(|z| z.conj()).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.is_finite())
    }
}

impl From<Vec<C64>> for ComplexVector {
    fn from(v: Vec<C64>) -> Self {
        ComplexVector(v)
    }
}

impl FromIterator<C64> for ComplexVector {
    fn from_iter<I: IntoIterator<Item = C64>>(iter: I) -> Self {
        ComplexVector(iter.into_iter().collect())
    }
}

impl Deref for ComplexVector {
    type Target = [C64];
    fn deref(&self) -> &[C64] {
        &self.0
    }
}

impl DerefMut for ComplexVector {
    fn deref_mut(&mut self) -> &mut [C64] {
        &mut self.0
    }
}

impl fmt::Debug for ComplexVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// `xᴴ y` over slices of equal length.
pub fn dotc(x: &[C64], y: &[C64]) -> C64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// A dense complex matrix in column-major storage.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    /// Builds a matrix from row slices (row-major literal order).
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[ComplexVector]) -> Self {
        let rows = columns.first().map_or(0, |c| c.len());
        assert!(columns.iter().all(|c| c.len() == rows), "ragged columns");
        let data = columns.iter().flat_map(|c| c.iter().copied()).collect();
        ComplexMatrix {
            rows,
            cols: columns.len(),
            data,
        }
    }

    /// Inverse of [`vec`]: reshapes a column-stacked buffer.
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [C64] {
        let r = self.rows;
        &mut self.data[j * r..(j + 1) * r]
    }

    pub fn columns(&self) -> Vec<ComplexVector> {
        (0..self.cols)
            .map(|j| ComplexVector::from(self.column(j).to_vec()))
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scaled(&self, s: C64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    /// Matrix product `self · rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for k in 0..self.cols {
                let b = rhs[(k, j)];
                if b == ZERO {
                    continue;
                }
                for (d, a) in dst.iter_mut().zip(self.column(k)) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `selfᴴ · rhs` without forming the adjoint.
    pub fn adjoint_mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.rows, rhs.rows, "row counts differ");
        Self::from_fn(self.cols, rhs.cols, |i, j| dotc(self.column(i), rhs.column(j)))
    }

    pub fn mul_vec(&self, x: &[C64]) -> ComplexVector {
        assert_eq!(self.cols, x.len());
        let mut out = ComplexVector::zeros(self.rows);
        for (k, xk) in x.iter().enumerate() {
            if *xk == ZERO {
                continue;
            }
            for (d, a) in out.iter_mut().zip(self.column(k)) {
                *d += a * xk;
            }
        }
        out
    }

    /// `selfᴴ · x`.
    pub fn adjoint_mul_vec(&self, x: &[C64]) -> ComplexVector {
        assert_eq!(self.rows, x.len());
        (0..self.cols).map(|j| dotc(self.column(j), x)).collect()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<_> = (0..self.cols).map(|j| self[(i, j)]).collect();
            writeln!(f, "  {row:?}")?;
        }
        write!(f, "]")
    }
}

/// Kronecker product. Block `(i, j)` of the result is `a[i, j] · b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (br, bc) = (b.rows, b.cols);
    ComplexMatrix::from_fn(a.rows * br, a.cols * bc, |r, c| {
        a[(r / br, c / bc)] * b[(r % br, c % bc)]
    })
}

/// Column stacking, so that `xᵀ Q y = (yᵀ ⊗ xᵀ) vec(Q)`.
pub fn vec(m: &ComplexMatrix) -> ComplexVector {
    ComplexVector::from(m.data.clone())
}

pub fn frobenius_norm(m: &ComplexMatrix) -> f64 {
    m.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Cholesky factor `A = L Lᴴ` of a Hermitian positive definite matrix.
#[derive(Clone, Debug)]
pub struct HermitianFactor {
    lower: ComplexMatrix,
}

impl HermitianFactor {
    /// Factors `a`. Only the lower triangle is read.
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        let n = a.rows;
        if a.cols != n {
            return Err(Error::DimensionMismatch(format!(
                "hermitian solve needs a square matrix, got {}x{}",
                a.rows, a.cols
            )));
        }
        let threshold = PIVOT_TOLERANCE * a.max_abs();
        let mut l = ComplexMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > threshold) {
                return Err(Error::SingularMatrix {
                    row: j,
                    pivot: d,
                    threshold,
                });
            }
            let djj = d.sqrt();
            l[(j, j)] = C64::new(djj, 0.0);
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(HermitianFactor { lower: l })
    }

    pub fn dim(&self) -> usize {
        self.lower.rows
    }

    pub fn solve(&self, rhs: &[C64]) -> ComplexVector {
        let n = self.dim();
        assert_eq!(rhs.len(), n);
        let l = &self.lower;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)].re;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[(k, i)].conj() * y[k];
            }
            y[i] = s / l[(i, i)].re;
        }
        ComplexVector::from(y)
    }

    pub fn solve_matrix(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let cols: Vec<_> = (0..rhs.cols).map(|j| self.solve(rhs.column(j))).collect();
        ComplexMatrix::from_columns(&cols)
    }

    /// Ratio of the largest to the smallest squared Cholesky diagonal, a cheap
    /// lower bound on the 2-norm condition number.
    pub fn condition_estimate(&self) -> f64 {
        let diag: Vec<f64> = (0..self.dim()).map(|i| self.lower[(i, i)].re).collect();
        let max = diag.iter().copied().fold(0.0, f64::max);
        let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
        (max / min).powi(2)
    }
}

/// Solves `a · x = rhs` for Hermitian positive definite `a`.
///
/// No ridge is added; callers regularize beforehand.
pub fn hermitian_solve(a: &ComplexMatrix, rhs: &ComplexVector) -> Result<ComplexVector> {
    if rhs.len() != a.rows {
        return Err(Error::DimensionMismatch(format!(
            "rhs of length {} for a {}x{} system",
            rhs.len(),
            a.rows,
            a.cols
        )));
    }
    Ok(HermitianFactor::new(a)?.solve(rhs))
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn random_c64(rng: &mut impl Rng) -> C64 {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| random_c64(rng))
    }

    pub fn random_vector(rng: &mut impl Rng, len: usize) -> ComplexVector {
        ComplexVector::from_fn(len, |_| random_c64(rng))
    }

    pub fn random_hpd(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
        let b = random_matrix(rng, n, n);
        b.adjoint_mul(&b).add(&ComplexMatrix::identity(n).scaled(C64::new(0.5, 0.0)))
    }
}
