//! Compressed-row sparse matrices and the operator interface the eigensolver consumes.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dense::{Block, Scalar};

/// Anything that can be applied to a block of vectors.
///
/// Implementations must be Hermitian; `apply_block` overwrites `y`.
pub trait LinearOperator<T: Scalar>: Sync {
    fn dim(&self) -> usize;
    fn apply_block(&self, x: &Block<T>, y: &mut Block<T>);
    /// Real diagonal (Hermitian operators have a real diagonal).
    fn diagonal(&self) -> Vec<f64>;
    /// Upper bound on the induced 1-norm.
    fn norm1(&self) -> f64;
}

/// Square sparse matrix in compressed-row layout with sorted, unique column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds from `(row, col, value)` triplets; duplicates are summed, exact zeros kept out.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r},{c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            indptr[r + 1] += indptr[r];
        }
        Self {
            n,
            indptr,
            indices,
            values,
        }
        .pruned()
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal_from(&vec![1.0; n])
    }

    pub fn diagonal_from(d: &[f64]) -> Self {
        Self {
            n: d.len(),
            indptr: (0..=d.len()).collect(),
            indices: (0..d.len()).collect(),
            values: d.iter().map(|&v| T::from_re(v)).collect(),
        }
    }

    fn pruned(self) -> Self {
        let mut indptr = vec![0usize; self.n + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k] != T::zero() {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        Self {
            n: self.n,
            indptr,
            indices,
            values,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let cols = &self.indices[self.indptr[r]..self.indptr[r + 1]];
        match cols.binary_search(&c) {
            Ok(i) => self.values[self.indptr[r] + i],
            Err(_) => T::zero(),
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// `y ← M x`.
    pub fn apply(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *out = acc;
        }
    }

    /// `y ← y + alpha M x`.
    pub fn apply_add(&self, alpha: T, x: &[T], y: &mut [T]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *out += alpha * acc;
        }
    }

    /// `y ← y + alpha Mᴴ x`.
    pub fn apply_adjoint_add(&self, alpha: T, x: &[T], y: &mut [T]) {
        for r in 0..self.n {
            let xr = alpha * x[r];
            for k in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[k]] += self.values[k].cj() * xr;
            }
        }
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    /// Maximum absolute column sum.
    pub fn norm1_exact(&self) -> f64 {
        let mut col = vec![0.0; self.n];
        for (k, &c) in self.indices.iter().enumerate() {
            col[c] += self.values[k].abs2().sqrt();
        }
        col.into_iter().fold(0.0, f64::max)
    }

    /// Largest entry of `|M − Mᴴ|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (r, c, v) in self.triplets() {
            let d = (v - self.get(c, r).cj()).abs2().sqrt();
            worst = worst.max(d);
        }
        worst
    }

    /// Entrywise conjugate.
    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.cj());
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.n,
            self.triplets().map(|(r, c, v)| (c, r, v.cj())).collect(),
        )
    }

    pub fn scaled(&self, alpha: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out.pruned()
    }

    /// `Σ αᵢ Mᵢ`.
    pub fn linear_combination(terms: &[(T, &CsrMatrix<T>)]) -> Self {
        let n = terms.first().map_or(0, |t| t.1.n);
        let mut trip = Vec::new();
        for (alpha, m) in terms {
            assert_eq!(m.n, n);
            trip.extend(m.triplets().map(|(r, c, v)| (r, c, *alpha * v)));
        }
        Self::from_triplets(n, trip)
    }

    /// `self · other`.
    pub fn matmul(&self, other: &CsrMatrix<T>) -> Self {
        assert_eq!(self.n, other.n);
        let mut trip = Vec::new();
        let mut acc: Vec<T> = vec![T::zero(); self.n];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; self.n];
        for r in 0..self.n {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !mark[c] {
                        mark[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &touched {
                trip.push((r, c, acc[c]));
                acc[c] = T::zero();
                mark[c] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.n, trip)
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// Writes one `row col re im` line per stored entry (zero-based indices).
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# n={} nnz={}", self.n, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{} {} {:.17e} {:.17e}", r, c, v.re(), v.im())?;
        }
        Ok(())
    }
}

impl CsrMatrix<f64> {
    pub fn to_complex(&self) -> CsrMatrix<Complex64> {
        CsrMatrix {
            n: self.n,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

impl<T: Scalar> LinearOperator<T> for CsrMatrix<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_block(&self, x: &Block<T>, y: &mut Block<T>) {
        assert_eq!(x.rows(), self.n);
        assert_eq!(x.cols(), y.cols());
        let m = x.cols();
        #[cfg(feature = "parallel")]
        if rayon::current_num_threads() > 1 && m > 1 {
            use rayon::prelude::*;
            let n = self.n;
            y.as_mut_slice()
                .par_chunks_mut(n)
                .zip(x.as_slice().par_chunks(n))
                .for_each(|(yc, xc)| self.apply(xc, yc));
            return;
        }
        let n = self.n;
        let xs = x.as_slice();
        let ys = y.as_mut_slice();
        let mut acc = vec![T::zero(); m];
        for r in 0..n {
            acc.iter_mut().for_each(|a| *a = T::zero());
            for k in self.indptr[r]..self.indptr[r + 1] {
                let v = self.values[k];
                let c = self.indices[k];
                for (j, a) in acc.iter_mut().enumerate() {
                    *a += v * xs[j * n + c];
                }
            }
            for (j, a) in acc.iter().enumerate() {
                ys[j * n + r] = *a;
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.diag().into_iter().map(|v| v.re()).collect()
    }

    fn norm1(&self) -> f64 {
        self.norm1_exact()
    }
}
