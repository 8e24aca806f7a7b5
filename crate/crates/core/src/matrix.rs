//! Dense square matrices indexed `(source, target)`.

use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};

/// A `K x K` row-major matrix. Row `k` holds the effects of source dimension
/// `k` on every target dimension.
///
/// Serialises as a list of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<T>>", try_from = "Vec<Vec<T>>")]
#[serde(bound(
    serialize = "T: Clone + Serialize",
    deserialize = "T: Clone + Deserialize<'de>"
))]
pub struct Matrix<T = f64> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Clone> Matrix<T> {
    pub fn from_elem(dim: usize, value: T) -> Self {
        Matrix {
            dim,
            data: alloc::vec![value; dim * dim],
        }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for k in 0..dim {
            for l in 0..dim {
                data.push(f(k, l));
            }
        }
        Matrix { dim, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(HawkesError::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend(row);
        }
        Ok(Matrix { dim, data })
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data
            .chunks(self.dim.max(1))
            .map(|r| r.to_vec())
            .collect()
    }

    pub fn map<U: Clone>(&self, f: impl FnMut(&T) -> U) -> Matrix<U> {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T> Matrix<T> {
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn iter(&self) -> core::slice::Iter<'_, T> {
        self.data.iter()
    }

    /// Iterates `(k, l, value)` in row-major order.
    pub fn indexed(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let dim = self.dim;
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| (i / dim, i % dim, v))
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (k, l): (usize, usize)) -> &T {
        debug_assert!(k < self.dim && l < self.dim);
        &self.data[k * self.dim + l]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (k, l): (usize, usize)) -> &mut T {
        debug_assert!(k < self.dim && l < self.dim);
        &mut self.data[k * self.dim + l]
    }
}

impl<T: Clone> From<Matrix<T>> for Vec<Vec<T>> {
    fn from(m: Matrix<T>) -> Self {
        m.rows()
    }
}

impl<T: Clone> TryFrom<Vec<Vec<T>>> for Matrix<T> {
    type Error = HawkesError;

    fn try_from(rows: Vec<Vec<T>>) -> Result<Self> {
        Matrix::from_rows(rows)
    }
}

impl Matrix<f64> {
    /// Spectral radius of a non-negative matrix.
    ///
    /// Power iteration on `A + I` (primitive whenever `A` is non-negative)
    /// with Collatz-Wielandt bounds; the returned value is the upper bound
    /// minus one, so it never understates the radius by more than the
    /// tolerance.
    pub fn spectral_radius(&self) -> f64 {
        let n = self.dim;
        if n == 0 {
            return 0.0;
        }
        let mut x = alloc::vec![1.0; n];
        let mut y = alloc::vec![0.0; n];
        let mut upper = f64::INFINITY;
        for _ in 0..100_000 {
            for l in 0..n {
                let mut acc = x[l];
                for k in 0..n {
                    acc += self[(k, l)] * x[k];
                }
                y[l] = acc;
            }
            let mut lo = f64::INFINITY;
            let mut hi: f64 = 0.0;
            for i in 0..n {
                let r = y[i] / x[i];
                lo = lo.min(r);
                hi = hi.max(r);
            }
            upper = hi;
            let norm = y.iter().copied().fold(0.0, f64::max);
            for i in 0..n {
                x[i] = y[i] / norm;
            }
            if hi - lo <= 1e-13 * hi {
                break;
            }
        }
        upper - 1.0
    }
}
