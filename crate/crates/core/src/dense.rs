//! Scalars and tall-skinny dense blocks used by the eigensolver.
//!
//! A [`Block`] stores `cols` vectors of length `rows` contiguously (column-major).
//! Products with small coefficient matrices go through `matrixmultiply`.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;
use rand::Rng;

/// Field scalar of an operator: `f64` for real-symmetric, [`Complex64`] for
/// complex-Hermitian problems.
pub trait Scalar:
    ComplexField<RealField = f64> + Copy + Default + Send + Sync + std::fmt::Debug + 'static
{
    const IS_COMPLEX: bool;

    fn from_re(x: f64) -> Self;
    /// Imaginary part is dropped for real scalars.
    fn from_parts(re: f64, im: f64) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn cj(self) -> Self;
    fn abs2(self) -> f64;
    fn sample<R: Rng>(rng: &mut R) -> Self;

    /// `C ← Aᴴ B` with `A` (`n × ma`) and `B` (`n × mb`) column-major.
    fn gram_into(n: usize, ma: usize, mb: usize, a: &[Self], b: &[Self], c: &mut [Self]);

    /// `C ← A B` with `A` (`n × k`), `B` (`k × m`) and `C` (`n × m`) column-major.
    fn mul_into(n: usize, k: usize, m: usize, a: &[Self], b: &[Self], c: &mut [Self]);
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;

    #[inline]
    fn from_re(x: f64) -> Self {
        x
    }
    #[inline]
    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn im(self) -> f64 {
        0.0
    }
    #[inline]
    fn cj(self) -> Self {
        self
    }
    #[inline]
    fn abs2(self) -> f64 {
        self * self
    }
    fn sample<R: Rng>(rng: &mut R) -> Self {
        rng.gen::<f64>() - 0.5
    }

    fn gram_into(n: usize, ma: usize, mb: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
        assert!(a.len() >= n * ma && b.len() >= n * mb && c.len() >= ma * mb);
        if ma == 0 || mb == 0 {
            return;
        }
        // Safety: bounds asserted above, strides describe column-major storage.
        unsafe {
            matrixmultiply::dgemm(
                ma,
                n,
                mb,
                1.0,
                a.as_ptr(),
                n as isize,
                1,
                b.as_ptr(),
                1,
                n as isize,
                0.0,
                c.as_mut_ptr(),
                1,
                ma as isize,
            );
        }
    }

    fn mul_into(n: usize, k: usize, m: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
        assert!(a.len() >= n * k && b.len() >= k * m && c.len() >= n * m);
        if n == 0 || m == 0 {
            return;
        }
        if k == 0 {
            c[..n * m].iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        unsafe {
            matrixmultiply::dgemm(
                n,
                k,
                m,
                1.0,
                a.as_ptr(),
                1,
                n as isize,
                b.as_ptr(),
                1,
                k as isize,
                0.0,
                c.as_mut_ptr(),
                1,
                n as isize,
            );
        }
    }
}

impl Scalar for Complex64 {
    const IS_COMPLEX: bool = true;

    #[inline]
    fn from_re(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    #[inline]
    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    #[inline]
    fn im(self) -> f64 {
        self.im
    }
    #[inline]
    fn cj(self) -> Self {
        Complex64::new(self.re, -self.im)
    }
    #[inline]
    fn abs2(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
    fn sample<R: Rng>(rng: &mut R) -> Self {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    }

    fn gram_into(n: usize, ma: usize, mb: usize, a: &[Self], b: &[Self], c: &mut [Self]) {
        assert!(a.len() >= n * ma && b.len() >= n * mb && c.len() >= ma * mb);
        if ma == 0 || mb == 0 {
            return;
        }
        // Aᴴ B = (ArᵀBr + AiᵀBi) + i (ArᵀBi − AiᵀBr), computed on the interleaved
        // real view of the data.
        let mut rr = vec![0.0f64; ma * mb];
        let mut ii = vec![0.0f64; ma * mb];
        let mut ri = vec![0.0f64; ma * mb];
        let mut ir = vec![0.0f64; ma * mb];
        let ap = a.as_ptr() as *const f64;
        let bp = b.as_ptr() as *const f64;
        let (rs_t, cs_t) = (2 * n as isize, 2isize);
        let (rs_b, cs_b) = (2isize, 2 * n as isize);
        // Safety: Complex64 is repr(C) over two f64, strides stay inside the slices.
        unsafe {
            let gemm = |x: *const f64, y: *const f64, out: &mut [f64]| {
                matrixmultiply::dgemm(
                    ma,
                    n,
                    mb,
                    1.0,
                    x,
                    rs_t,
                    cs_t,
                    y,
                    rs_b,
                    cs_b,
                    0.0,
                    out.as_mut_ptr(),
                    1,
                    ma as isize,
                )
            };
            gemm(ap, bp, &mut rr);
            gemm(ap.add(1), bp.add(1), &mut ii);
            gemm(ap, bp.add(1), &mut ri);
            gemm(ap.add(1), bp, &mut ir);
        }
        for idx in 0..ma * mb {
            c[idx] = Complex64::new(rr[idx] + ii[idx], ri[idx] - ir[idx]);
        }
    }

    fn mul_into(n: usize, k: usize, m: usize, a: &[Self], b: &[Self], c: &mut [Self]) {
        assert!(a.len() >= n * k && b.len() >= k * m && c.len() >= n * m);
        if n == 0 || m == 0 {
            return;
        }
        if k == 0 {
            c[..n * m].iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            return;
        }
        unsafe {
            matrixmultiply::zgemm(
                matrixmultiply::CGemmOption::Standard,
                matrixmultiply::CGemmOption::Standard,
                n,
                k,
                m,
                [1.0, 0.0],
                a.as_ptr() as *const [f64; 2],
                1,
                n as isize,
                b.as_ptr() as *const [f64; 2],
                1,
                k as isize,
                [0.0, 0.0],
                c.as_mut_ptr() as *mut [f64; 2],
                1,
                n as isize,
            );
        }
    }
}

/// `cols` column vectors of length `rows`, stored column after column.
#[derive(Clone, Debug, PartialEq)]
pub struct Block<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Block<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_columns(rows: usize, columns: &[Vec<T>]) -> Self {
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            assert_eq!(c.len(), rows, "column length mismatch");
            data.extend_from_slice(c);
        }
        Self {
            rows,
            cols: columns.len(),
            data,
        }
    }

    pub fn random<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| T::sample(rng)).collect();
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }
    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }
    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }
    #[inline]
    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }
    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn into_columns(self) -> Vec<Vec<T>> {
        if self.rows == 0 {
            return vec![Vec::new(); self.cols];
        }
        self.data.chunks(self.rows).map(|c| c.to_vec()).collect()
    }

    /// `selfᴴ other`.
    pub fn gram(&self, other: &Block<T>) -> DMatrix<T> {
        assert_eq!(self.rows, other.rows);
        let mut out = DMatrix::<T>::zeros(self.cols, other.cols);
        T::gram_into(
            self.rows,
            self.cols,
            other.cols,
            &self.data,
            &other.data,
            out.as_mut_slice(),
        );
        out
    }

    /// `self · coeffs`.
    pub fn mul(&self, coeffs: &DMatrix<T>) -> Block<T> {
        assert_eq!(self.cols, coeffs.nrows());
        let mut out = Block::zeros(self.rows, coeffs.ncols());
        T::mul_into(
            self.rows,
            self.cols,
            coeffs.ncols(),
            &self.data,
            coeffs.as_slice(),
            &mut out.data,
        );
        out
    }

    /// `self ← self − other · coeffs`.
    pub fn sub_mul(&mut self, other: &Block<T>, coeffs: &DMatrix<T>) {
        let prod = other.mul(coeffs);
        assert_eq!(prod.cols, self.cols);
        for (a, b) in self.data.iter_mut().zip(prod.data.iter()) {
            *a -= *b;
        }
    }

    pub fn select(&self, idx: &[usize]) -> Block<T> {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for &j in idx {
            data.extend_from_slice(self.col(j));
        }
        Block {
            rows: self.rows,
            cols: idx.len(),
            data,
        }
    }

    pub fn hcat(blocks: &[&Block<T>]) -> Block<T> {
        let rows = blocks.first().map_or(0, |b| b.rows);
        let mut data = Vec::with_capacity(rows * blocks.iter().map(|b| b.cols).sum::<usize>());
        let mut cols = 0;
        for b in blocks {
            assert_eq!(b.rows, rows);
            data.extend_from_slice(&b.data);
            cols += b.cols;
        }
        Block { rows, cols, data }
    }

    pub fn col_norm(&self, j: usize) -> f64 {
        self.col(j).iter().map(|v| v.abs2()).sum::<f64>().sqrt()
    }
}

/// Hermitian part `(M + Mᴴ)/2` of a small square matrix.
pub fn hermitian_part<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let n = m.nrows();
    let half = T::from_re(0.5);
    DMatrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].cj()) * half)
}

/// Eigenpairs of a small Hermitian matrix, sorted by ascending eigenvalue.
pub fn hermitian_eigh<T: Scalar>(m: &DMatrix<T>) -> (Vec<f64>, DMatrix<T>) {
    let eig = nalgebra::SymmetricEigen::new(hermitian_part(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}
