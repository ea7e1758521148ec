use crate::error::{invalid, Result};
use crate::Real;

/// Largest dimension accepted for a dense symmetric matrix.
pub const MAX_DIM: usize = 1024;

/// Square dense matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![T::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != dim * dim {
            return invalid(format!("expected {} entries, got {}", dim * dim, data.len()));
        }
        Ok(Self { dim, data })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(x).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
            .collect()
    }

    /// `xᵀ A x`
    pub fn quad_form(&self, x: &[T]) -> T {
        self.mul_vec(x).iter().zip(x).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    /// Non-zero entries as `(row, col, value)` in row-major order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(move |(k, &v)| (k / self.dim, k % self.dim, v))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.dim + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.dim + j]
    }
}

/// Real symmetric matrix. Construction symmetrizes, so `a[i][j] == a[j][i]`
/// holds bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix<T> {
    inner: Matrix<T>,
}

impl<T: Real> SymmetricMatrix<T> {
    /// Builds from row-major entries, replacing each off-diagonal pair by its mean.
    pub fn from_row_major(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return invalid("matrix dimension must be positive");
        }
        if dim > MAX_DIM {
            return invalid(format!("matrix dimension {dim} exceeds {MAX_DIM}"));
        }
        let mut m = Matrix::from_row_major(dim, data)?;
        let half = T::lit(0.5);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let a = m[(i, j)];
                let b = m[(j, i)];
                let s = if a == b { a } else { (a + b) * half };
                m[(i, j)] = s;
                m[(j, i)] = s;
            }
        }
        Ok(Self { inner: m })
    }

    pub fn from_matrix(m: Matrix<T>) -> Result<Self> {
        let dim = m.dim;
        Self::from_row_major(dim, m.data)
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return invalid("rows must form a square matrix");
        }
        Self::from_row_major(dim, rows.concat())
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::from_matrix(Matrix::identity(dim))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    #[inline]
    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.inner
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.inner[(i, j)]
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> T {
        (0..self.dim())
            .map(|i| self.inner.row(i).iter().fold(T::zero(), |acc, &x| acc + x.abs()))
            .fold(T::zero(), T::max)
    }

    pub fn trace(&self) -> T {
        (0..self.dim()).map(|i| self.inner[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.inner.data.iter().all(|x| x.is_finite())
    }
}
