//! Compressed sparse row storage for complex operators.
//!
//! Ladder, internal and parity operators on a truncated Fock space have at
//! most a handful of entries per row, so every operator is carried in CSR
//! form and densified only on demand.

use ndarray::Array2;
use num_traits::Zero;

use crate::scalar::{Cx, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Cx<T>>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![Cx::new(T::one(), T::zero()); n])
    }

    pub fn from_diagonal(diag: &[Cx<T>]) -> Self {
        let n = diag.len();
        let mut out = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            if !d.is_zero() {
                out.indices.push(i);
                out.values.push(d);
            }
            out.indptr[i + 1] = out.indices.len();
        }
        out
    }

    /// Builds from (row, col, value) triplets. Duplicates are summed and exact
    /// zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(usize, usize, Cx<T>)>) -> Self {
        trip.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut out = Self::zeros(nrows, ncols);
        let mut row = 0;
        let mut iter = trip.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            while row < r {
                row += 1;
                out.indptr[row] = out.indices.len();
            }
            if !v.is_zero() {
                out.indices.push(c);
                out.values.push(v);
            }
        }
        while row < nrows {
            row += 1;
            out.indptr[row] = out.indices.len();
        }
        out
    }

    pub fn from_dense(m: &Array2<Cx<T>>) -> Self {
        let trip = m
            .indexed_iter()
            .filter(|(_, v)| !v.is_zero())
            .map(|((i, j), &v)| (i, j, v))
            .collect();
        Self::from_triplets(m.nrows(), m.ncols(), trip)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[Cx<T>]) {
        let span = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> Cx<T> {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => Cx::zero(),
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Cx<T>)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn to_dense(&self) -> Array2<Cx<T>> {
        let mut out = Array2::zeros((self.nrows, self.ncols));
        for (i, j, v) in self.triplets() {
            out[[i, j]] = v;
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let trip = self.triplets().map(|(i, j, v)| (j, i, v.conj())).collect();
        Self::from_triplets(self.ncols, self.nrows, trip)
    }

    pub fn transpose(&self) -> Self {
        let trip = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, trip)
    }

    pub fn scale(&self, s: Cx<T>) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = *v * s);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let trip = self.triplets().chain(other.triplets()).collect();
        Self::from_triplets(self.nrows, self.ncols, trip)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Cx::new(-T::one(), T::zero())))
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut trip = Vec::new();
        let mut acc: Vec<Cx<T>> = vec![Cx::zero(); other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; other.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&k, &a) in cols.iter().zip(vals) {
                let (cols2, vals2) = other.row(k);
                for (&j, &b) in cols2.iter().zip(vals2) {
                    if !mark[j] {
                        mark[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            for &j in &touched {
                trip.push((i, j, acc[j]));
                acc[j] = Cx::zero();
                mark[j] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.nrows, other.ncols, trip)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz() * other.nnz());
        for (i, j, a) in self.triplets() {
            for (k, l, b) in other.triplets() {
                trip.push((i * other.nrows + k, j * other.ncols + l, a * b));
            }
        }
        Self::from_triplets(self.nrows * other.nrows, self.ncols * other.ncols, trip)
    }

    pub fn mul_vec(&self, x: &[Cx<T>]) -> Vec<Cx<T>> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter()
                    .zip(vals)
                    .fold(Cx::zero(), |acc, (&j, &v)| acc + v * x[j])
            })
            .collect()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .map(|v| v.norm())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Max-norm of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.sub(other).max_abs()
    }

    /// Restricts to rows and columns `< keep` on each side; used to truncate
    /// operators computed in an enlarged space.
    pub fn truncate(&self, keep: usize) -> Self {
        let trip = self
            .triplets()
            .filter(|&(i, j, _)| i < keep && j < keep)
            .collect();
        Self::from_triplets(keep.min(self.nrows), keep.min(self.ncols), trip)
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(i, j, _)| i == j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Cx<f64> {
        Cx::new(re, im)
    }

    #[test]
    fn triplets_merge_duplicates_and_drop_zeros() {
        let m = CsrMatrix::from_triplets(
            2,
            2,
            vec![(1, 0, c(1.0, 0.0)), (0, 1, c(2.0, 1.0)), (1, 0, c(-1.0, 0.0))],
        );
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(2.0, 1.0));
        assert_eq!(m.get(1, 0), c(0.0, 0.0));
    }

    #[test]
    fn matmul_matches_dense() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            vec![(0, 1, c(1.0, 2.0)), (1, 2, c(0.5, 0.0)), (2, 0, c(0.0, -1.0)), (2, 2, c(3.0, 0.0))],
        );
        let b = a.adjoint().add(&CsrMatrix::identity(3));
        let sparse = a.matmul(&b).to_dense();
        let dense = a.to_dense().dot(&b.to_dense());
        for (x, y) in sparse.iter().zip(dense.iter()) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn kron_dimensions_and_entries() {
        let a = CsrMatrix::<f64>::identity(2);
        let b = CsrMatrix::from_triplets(5, 5, vec![(0, 1, c(1.0, 0.0))]);
        let k = a.kron(&b).kron(&CsrMatrix::identity(5));
        assert_eq!(k.nrows(), 50);
        assert_eq!(k.get(25, 30), c(1.0, 0.0));
    }
}
