//! Lowest eigenpairs of sparse Hermitian operators by locally optimal block
//! preconditioned conjugate gradients (LOBPCG).
//!
//! The search space at every step is `[X, W, P]`: current Ritz block, preconditioned
//! residuals of the still-active columns, and the previous search directions. `W` and
//! `P` are kept orthogonal to `X` and orthonormalized by SVQB, so the Rayleigh–Ritz step
//! is a standard small Hermitian eigenproblem.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dense::{hermitian_eigh, Block, Scalar};
use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, LinearOperator};

pub const DEFAULT_SEED: u64 = 0x7457_6973_7453_7065;
pub const DEFAULT_MAX_ITER: usize = 2000;

/// Approximate inverse applied to residual blocks.
pub trait Preconditioner<T: Scalar>: Sync {
    fn apply(&self, r: &Block<T>) -> Block<T>;
}

/// Diagonal (Jacobi) preconditioner.
#[derive(Clone, Debug)]
pub struct Jacobi {
    inv: Vec<f64>,
}

impl Jacobi {
    pub fn new(diag: &[f64]) -> Self {
        let floor = diag.iter().fold(0.0f64, |m, &d| m.max(d.abs())) * 1e-14;
        Self {
            inv: diag
                .iter()
                .map(|&d| if d.abs() > floor { 1.0 / d.abs() } else { 1.0 })
                .collect(),
        }
    }
}

impl<T: Scalar> Preconditioner<T> for Jacobi {
    fn apply(&self, r: &Block<T>) -> Block<T> {
        let mut out = r.clone();
        let n = r.rows();
        for j in 0..r.cols() {
            let col = out.col_mut(j);
            for i in 0..n {
                col[i] *= T::from_re(self.inv[i]);
            }
        }
        out
    }
}

/// Identity preconditioner.
pub struct NoPreconditioner;

impl<T: Scalar> Preconditioner<T> for NoPreconditioner {
    fn apply(&self, r: &Block<T>) -> Block<T> {
        r.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub k: usize,
    pub tol: f64,
    pub seed: u64,
    pub max_iter: usize,
    /// Columns carried beyond `k`.
    pub extra: usize,
}

impl SolverOptions {
    pub fn new(k: usize, tol: f64) -> Self {
        Self {
            k,
            tol,
            seed: DEFAULT_SEED,
            max_iter: DEFAULT_MAX_ITER,
            extra: 4,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

/// Lowest eigenpairs found by the solver.
#[derive(Clone, Debug)]
pub struct SpectralResult<T> {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, one column per eigenvalue.
    pub eigenvectors: Block<T>,
    /// `‖Mx − λx‖` for each pair (vectors have unit norm).
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: Vec<bool>,
    /// The residual threshold `tol·‖M‖₁` used for the converged flags.
    pub threshold: f64,
    pub seed: u64,
}

impl<T: Scalar> SpectralResult<T> {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    pub fn eigenvector(&self, i: usize) -> &[T] {
        self.eigenvectors.col(i)
    }
}

/// `k` lowest eigenpairs with the Jacobi preconditioner and the default seed.
pub fn lowest_eigenpairs<T: Scalar, Op: LinearOperator<T> + ?Sized>(
    op: &Op,
    k: usize,
    tol: f64,
) -> Result<SpectralResult<T>> {
    let jacobi = Jacobi::new(&op.diagonal());
    lobpcg(op, &jacobi, SolverOptions::new(k, tol))
}

fn apply<T: Scalar, Op: LinearOperator<T> + ?Sized>(op: &Op, x: &Block<T>) -> Block<T> {
    let mut y = Block::zeros(x.rows(), x.cols());
    op.apply_block(x, &mut y);
    y
}

/// Orthonormalizes the columns of `v` (SVQB), applying the same transform to `av`.
/// Numerically dependent directions are dropped.
fn svqb<T: Scalar>(v: &mut Block<T>, mut av: Option<&mut Block<T>>) {
    for _pass in 0..3 {
        if v.cols() == 0 {
            return;
        }
        let g = v.gram(v);
        let m = g.nrows();
        let mut defect = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                let want = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((g[(i, j)] - T::from_re(want)).abs2().sqrt());
            }
        }
        if defect < 1e-12 {
            return;
        }
        let d: Vec<f64> = (0..m)
            .map(|i| {
                let gi = g[(i, i)].re();
                if gi > 0.0 {
                    1.0 / gi.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let scaled = DMatrix::from_fn(m, m, |i, j| g[(i, j)] * T::from_re(d[i] * d[j]));
        let (vals, vecs) = hermitian_eigh(&scaled);
        let top = vals.last().copied().unwrap_or(0.0);
        let keep: Vec<usize> = (0..m).filter(|&i| vals[i] > 1e-13 * top.max(1e-300)).collect();
        let t = DMatrix::from_fn(m, keep.len(), |i, c| {
            vecs[(i, keep[c])] * T::from_re(d[i] / vals[keep[c]].sqrt())
        });
        *v = v.mul(&t);
        if let Some(a) = av.as_deref_mut() {
            *a = a.mul(&t);
        }
    }
}

/// Removes the components along the orthonormal block `x` (two passes).
fn project_out<T: Scalar>(x: &Block<T>, ax: Option<&Block<T>>, v: &mut Block<T>, mut av: Option<&mut Block<T>>) {
    for _ in 0..2 {
        let c = x.gram(v);
        v.sub_mul(x, &c);
        if let (Some(a), Some(ax)) = (av.as_deref_mut(), ax) {
            a.sub_mul(ax, &c);
        }
    }
}

/// Rayleigh–Ritz on an orthonormal basis `s` with image `as_`; returns ascending Ritz
/// values and coefficient vectors.
fn rayleigh_ritz<T: Scalar>(s: &Block<T>, as_: &Block<T>) -> (Vec<f64>, DMatrix<T>) {
    let g = s.gram(as_);
    hermitian_eigh(&g)
}

fn residuals<T: Scalar>(x: &Block<T>, ax: &Block<T>, lam: &[f64]) -> (Block<T>, Vec<f64>) {
    let mut r = ax.clone();
    let n = x.rows();
    let mut norms = Vec::with_capacity(lam.len());
    for (j, &l) in lam.iter().enumerate() {
        let xc = x.col(j);
        let rc = r.col_mut(j);
        let lt = T::from_re(l);
        let mut acc = 0.0;
        for i in 0..n {
            rc[i] -= xc[i] * lt;
            acc += rc[i].abs2();
        }
        norms.push(acc.sqrt());
    }
    (r, norms)
}

fn take_columns<T: Scalar>(c: &DMatrix<T>, rows: std::ops::Range<usize>, cols: usize) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), cols, |i, j| c[(rows.start + i, j)])
}

/// LOBPCG for the `opts.k` lowest eigenpairs of `op`.
pub fn lobpcg<T: Scalar, Op: LinearOperator<T> + ?Sized>(
    op: &Op,
    precond: &dyn Preconditioner<T>,
    opts: SolverOptions,
) -> Result<SpectralResult<T>> {
    let n = op.dim();
    let k = opts.k;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if n < k || 4 * k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} is not admissible for dimension {n} (need 1 <= k <= n/4)"
        )));
    }
    if !(1e-14..=1e-2).contains(&opts.tol) {
        return Err(Error::InvalidArgument(format!(
            "tolerance {} outside the supported range",
            opts.tol
        )));
    }
    let m = (k + opts.extra).min(n / 3).max(k);
    let norm1 = op.norm1();
    let threshold = opts.tol * norm1;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = Block::<T>::random(n, m, &mut rng);
    svqb(&mut x, None);
    let mut ax = apply(op, &x);
    let (mut lam, c) = rayleigh_ritz(&x, &ax);
    x = x.mul(&c);
    ax = ax.mul(&c);
    let mut p: Option<(Block<T>, Block<T>)> = None;

    let mut iterations = 0;
    let mut res_norms;
    let mut done = false;
    loop {
        let (r, norms) = residuals(&x, &ax, &lam);
        res_norms = norms;
        if res_norms[..k].iter().all(|&v| v <= threshold) {
            // Confirm with a freshly computed image to discard recurrence drift.
            svqb(&mut x, None);
            ax = apply(op, &x);
            let (l2, c2) = rayleigh_ritz(&x, &ax);
            x = x.mul(&c2);
            ax = ax.mul(&c2);
            lam = l2;
            let (_, fresh) = residuals(&x, &ax, &lam);
            res_norms = fresh;
            if res_norms[..k].iter().all(|&v| v <= threshold) {
                done = true;
                break;
            }
            p = None;
            continue;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let active: Vec<usize> = (0..x.cols()).filter(|&j| res_norms[j] > threshold).collect();
        let mut w = precond.apply(&r.select(&active));
        project_out(&x, None, &mut w, None);
        svqb(&mut w, None);
        let aw = apply(op, &w);

        let (mut z, mut az) = match p.take() {
            Some((pp, app)) => {
                let (mut pp, mut app) = (pp, app);
                project_out(&x, Some(&ax), &mut pp, Some(&mut app));
                (Block::hcat(&[&w, &pp]), Block::hcat(&[&aw, &app]))
            }
            None => (w, aw),
        };
        project_out(&x, Some(&ax), &mut z, Some(&mut az));
        svqb(&mut z, Some(&mut az));

        let mx = x.cols();
        let s = Block::hcat(&[&x, &z]);
        let as_ = Block::hcat(&[&ax, &az]);
        let (vals, c) = rayleigh_ritz(&s, &as_);
        let cm = take_columns(&c, 0..s.cols(), mx);
        let cz = take_columns(&c, mx..s.cols(), mx);
        x = s.mul(&cm);
        ax = as_.mul(&cm);
        lam = vals[..mx].to_vec();
        if z.cols() > 0 {
            p = Some((z.mul(&cz), az.mul(&cz)));
        }

        if iterations % 25 == 0 {
            svqb(&mut x, None);
            ax = apply(op, &x);
            let (l2, c2) = rayleigh_ritz(&x, &ax);
            x = x.mul(&c2);
            ax = ax.mul(&c2);
            lam = l2;
        }
    }
    if !done {
        svqb(&mut x, None);
        ax = apply(op, &x);
        let (l2, c2) = rayleigh_ritz(&x, &ax);
        x = x.mul(&c2);
        ax = ax.mul(&c2);
        lam = l2;
        res_norms = residuals(&x, &ax, &lam).1;
    }
    let keep: Vec<usize> = (0..k).collect();
    Ok(SpectralResult {
        eigenvalues: lam[..k].to_vec(),
        eigenvectors: x.select(&keep),
        residuals: res_norms[..k].to_vec(),
        iterations,
        converged: res_norms[..k].iter().map(|&v| v <= threshold).collect(),
        threshold,
        seed: opts.seed,
    })
}

/// `D^{-1/2} A D^{-1/2}` for a positive diagonal `D`.
struct DiagonallyScaled<'a> {
    a: &'a CsrMatrix<f64>,
    scaled: CsrMatrix<f64>,
}

impl<'a> DiagonallyScaled<'a> {
    fn new(a: &'a CsrMatrix<f64>, b: &[f64]) -> Self {
        let s: Vec<f64> = b.iter().map(|&v| 1.0 / v.sqrt()).collect();
        let scaled = CsrMatrix::from_triplets(
            a.n(),
            a.triplets().map(|(r, c, v)| (r, c, s[r] * v * s[c])).collect(),
        );
        Self { a, scaled }
    }
}

/// Lowest eigenvalue of the pencil `(a, diag(b))`.
pub fn generalized_lowest(a: &CsrMatrix<f64>, b: &[f64], tol: f64) -> Result<f64> {
    if b.len() != a.n() {
        return Err(Error::InvalidArgument("mass diagonal has the wrong length".into()));
    }
    if let Some((index, &value)) = b.iter().enumerate().find(|(_, &v)| !(v.is_finite() && v > 0.0)) {
        return Err(Error::NonPositiveWeight { index, value });
    }
    let op = DiagonallyScaled::new(a, b);
    debug_assert_eq!(op.a.n(), op.scaled.n());
    let res = lowest_eigenpairs::<f64, _>(&op.scaled, 1, tol)?;
    if !res.converged[0] {
        return Err(Error::NotConverged(format!(
            "generalized eigenproblem residual {:.3e} above {:.3e}",
            res.residuals[0], res.threshold
        )));
    }
    Ok(res.eigenvalues[0].max(0.0))
}

/// Preconditioner for tube operators ordered slice by slice.
///
/// The lowest `M` cross-section modes `φ_n` (eigenvalues `λ_n`) are treated exactly
/// through the tridiagonal s-problems `(T_s + λ_n − σ)`, where `T_s` is the Dirichlet
/// second difference along s; the complement uses the Jacobi diagonal.
pub struct ModalPreconditioner<T> {
    n_cross: usize,
    n_s: usize,
    ds: f64,
    modes: Block<T>,
    lambdas: Vec<f64>,
    sigma: f64,
    inv_diag: Vec<f64>,
}

impl<T: Scalar> ModalPreconditioner<T> {
    /// `modes` holds orthonormal cross-section eigenvectors with eigenvalues `lambdas`;
    /// `diag` is the operator diagonal; `sigma` must lie below `λ₁ + π²/(2L)²`.
    pub fn new(
        modes: Block<T>,
        lambdas: Vec<f64>,
        n_s: usize,
        ds: f64,
        sigma: f64,
        diag: &[f64],
    ) -> Self {
        let n_cross = modes.rows();
        assert_eq!(diag.len(), n_cross * n_s);
        assert_eq!(lambdas.len(), modes.cols());
        Self {
            n_cross,
            n_s,
            ds,
            modes,
            lambdas,
            sigma,
            inv_diag: diag
                .iter()
                .map(|&d| 1.0 / (d - sigma).max(1e-300))
                .collect(),
        }
    }

    fn apply_column(&self, r: &[T], out: &mut [T]) {
        let nc = self.n_cross;
        let ns = self.n_s;
        let mm = self.modes.cols();
        let phi = self.modes.as_slice();
        let mut coef = vec![T::zero(); mm * ns];
        T::gram_into(nc, mm, ns, phi, r, &mut coef);
        // Complement: (I − Π) D⁻¹ (I − Π) r.
        let mut proj = vec![T::zero(); nc * ns];
        T::mul_into(nc, mm, ns, phi, &coef, &mut proj);
        let mut q: Vec<T> = r
            .iter()
            .zip(&proj)
            .zip(&self.inv_diag)
            .map(|((&a, &b), &d)| (a - b) * T::from_re(d))
            .collect();
        let mut c2 = vec![T::zero(); mm * ns];
        T::gram_into(nc, mm, ns, phi, &q, &mut c2);
        T::mul_into(nc, mm, ns, phi, &c2, &mut proj);
        for (a, b) in q.iter_mut().zip(&proj) {
            *a -= *b;
        }
        // Modal part: tridiagonal solves along s.
        let off = -1.0 / (self.ds * self.ds);
        let mut cp = vec![0.0; ns];
        let mut dp = vec![T::zero(); ns];
        for n in 0..mm {
            let diag = 2.0 / (self.ds * self.ds) + self.lambdas[n] - self.sigma;
            // Thomas algorithm on coef[n + j·mm], j = 0..ns.
            cp[0] = off / diag;
            dp[0] = coef[n] * T::from_re(1.0 / diag);
            for j in 1..ns {
                let denom = diag - off * cp[j - 1];
                cp[j] = off / denom;
                dp[j] = (coef[n + j * mm] - dp[j - 1] * T::from_re(off)) * T::from_re(1.0 / denom);
            }
            coef[n + (ns - 1) * mm] = dp[ns - 1];
            for j in (0..ns - 1).rev() {
                coef[n + j * mm] = dp[j] - coef[n + (j + 1) * mm] * T::from_re(cp[j]);
            }
        }
        T::mul_into(nc, mm, ns, phi, &coef, out);
        for (a, b) in out.iter_mut().zip(&q) {
            *a += *b;
        }
    }
}

impl<T: Scalar> Preconditioner<T> for ModalPreconditioner<T> {
    fn apply(&self, r: &Block<T>) -> Block<T> {
        let n = self.n_cross * self.n_s;
        assert_eq!(r.rows(), n);
        let mut out = Block::zeros(n, r.cols());
        #[cfg(feature = "parallel")]
        if rayon::current_num_threads() > 1 && r.cols() > 1 {
            use rayon::prelude::*;
            out.as_mut_slice()
                .par_chunks_mut(n)
                .zip(r.as_slice().par_chunks(n))
                .for_each(|(o, rc)| self.apply_column(rc, o));
            return out;
        }
        for j in 0..r.cols() {
            let rc = r.col(j).to_vec();
            self.apply_column(&rc, out.col_mut(j));
        }
        out
    }
}

/// All eigenvalues of a small Hermitian matrix by dense factorization (ascending).
pub fn dense_eigenvalues<T: Scalar>(m: &CsrMatrix<T>) -> Vec<f64> {
    hermitian_eigh(&m.to_dense()).0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize, h: f64) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 / (h * h)));
            if i + 1 < n {
                t.push((i, i + 1, -1.0 / (h * h)));
                t.push((i + 1, i, -1.0 / (h * h)));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn dirichlet_chain_lowest_values() {
        let h = 1.0 / 64.0;
        let m = chain(63, h);
        let res = lowest_eigenpairs::<f64, _>(&m, 3, 1e-10).unwrap();
        assert!(res.all_converged());
        for (j, &l) in res.eigenvalues.iter().enumerate() {
            let q = (j + 1) as f64;
            let exact = 4.0 / (h * h) * (q * std::f64::consts::PI * h / 2.0).sin().powi(2);
            assert!((l - exact).abs() < 1e-8 * exact, "{l} vs {exact}");
        }
    }

    #[test]
    fn identity_is_immediate() {
        let m = CsrMatrix::<f64>::identity(40);
        let res = lowest_eigenpairs::<f64, _>(&m, 3, 1e-10).unwrap();
        assert!(res.eigenvalues.iter().all(|&l| (l - 1.0).abs() < 1e-14));
        assert!(res.residuals.iter().all(|&r| r < 1e-12));
    }

    #[test]
    fn rejects_large_k() {
        let m = CsrMatrix::<f64>::identity(10);
        assert!(lowest_eigenpairs::<f64, _>(&m, 3, 1e-8).is_err());
    }

    #[test]
    fn generalized_with_constant_mass_scales() {
        let m = chain(63, 1.0 / 64.0);
        let base = lowest_eigenpairs::<f64, _>(&m, 1, 1e-10).unwrap().eigenvalues[0];
        let g = generalized_lowest(&m, &vec![4.0; 63], 1e-10).unwrap();
        assert!((g - base / 4.0).abs() < 1e-8 * base);
    }
}
