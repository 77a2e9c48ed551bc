//! Finite-difference operators on a [`CrossSection`] and on the truncated tube.
//!
//! Every operator is derived from a discrete quadratic form (a sum of squared link
//! residuals), which makes Hermiticity and positive semidefiniteness hold exactly.
//! Dirichlet conditions are imposed by exclusion: a link to an exterior point keeps
//! only its interior endpoint.

use num_complex::Complex64;

use crate::dense::{Block, Scalar};
use crate::error::{Error, Result};
use crate::geometry::{CrossSection, EAST, NORTH, OUTSIDE, SOUTH, WEST};
use crate::sparse::{CsrMatrix, LinearOperator};
use crate::tube::{MagneticPotential, TwistProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    RealSymmetric,
    ComplexHermitian,
}

/// Grid information attached to an assembled operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridMeta {
    pub h: f64,
    pub n_cross: usize,
    pub sgrid: Option<SGrid>,
}

/// Sparse Hermitian matrix together with the grid that produced it.
#[derive(Clone, Debug)]
pub struct HermitianOperator<T> {
    pub matrix: CsrMatrix<T>,
    pub symmetry: Symmetry,
    pub meta: GridMeta,
}

impl<T: Scalar> HermitianOperator<T> {
    fn new(matrix: CsrMatrix<T>, symmetry: Symmetry, meta: GridMeta) -> Self {
        Self {
            matrix,
            symmetry,
            meta,
        }
    }

    pub fn dimension(&self) -> usize {
        self.matrix.n()
    }
}

impl HermitianOperator<f64> {
    pub fn to_complex(&self) -> HermitianOperator<Complex64> {
        HermitianOperator::new(self.matrix.to_complex(), self.symmetry, self.meta)
    }
}

impl<T: Scalar> LinearOperator<T> for HermitianOperator<T> {
    fn dim(&self) -> usize {
        self.matrix.n()
    }
    fn apply_block(&self, x: &Block<T>, y: &mut Block<T>) {
        self.matrix.apply_block(x, y)
    }
    fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal()
    }
    fn norm1(&self) -> f64 {
        self.matrix.norm1_exact()
    }
}

fn cross_meta(cs: &CrossSection) -> GridMeta {
    GridMeta {
        h: cs.h(),
        n_cross: cs.len(),
        sgrid: None,
    }
}

/// Boundary treatment for link forms on a slice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SliceBoundary {
    /// Links to exterior points keep their interior endpoint (value zero outside).
    Dirichlet,
    /// Links to exterior points are dropped (natural boundary condition).
    Neumann,
}

/// Matrix of `Σ_links |(u_q − u_p)/h − i a_mid (u_p + u_q)/2|²`, where `a_mid` is the
/// component of the slice potential along the link, sampled at the link midpoint.
fn link_form<T: Scalar>(
    cs: &CrossSection,
    potential: Option<&dyn Fn(f64, f64) -> [f64; 2]>,
    bc: SliceBoundary,
) -> CsrMatrix<T> {
    let h = cs.h();
    let ih = 1.0 / h;
    let coords = cs.coords();
    let nb = cs.neighbors();
    let mut trip: Vec<(usize, usize, T)> = Vec::with_capacity(5 * cs.len());
    let a_at = |x: f64, y: f64, comp: usize| potential.map_or(0.0, |f| f(x, y)[comp]);
    for p in 0..cs.len() {
        let (x, y) = coords[p];
        // Links starting at p toward +t₂ and +t₃, plus exterior links toward −t₂, −t₃.
        for (dir, comp, dx, dy) in [
            (EAST, 0, 0.5, 0.0),
            (NORTH, 1, 0.0, 0.5),
            (WEST, 0, -0.5, 0.0),
            (SOUTH, 1, 0.0, -0.5),
        ] {
            let q = nb[p][dir];
            let backward = dir == WEST || dir == SOUTH;
            if backward && q != OUTSIDE {
                continue;
            }
            if q == OUTSIDE && bc == SliceBoundary::Neumann {
                continue;
            }
            let a = a_at(x + dx * h, y + dy * h, comp);
            let self_term = ih * ih + 0.25 * a * a;
            trip.push((p, p, T::from_re(self_term)));
            if q != OUTSIDE {
                trip.push((q, q, T::from_re(self_term)));
                let re = -ih * ih + 0.25 * a * a;
                trip.push((p, q, T::from_parts(re, a * ih)));
                trip.push((q, p, T::from_parts(re, -a * ih)));
            }
        }
    }
    CsrMatrix::from_triplets(cs.len(), trip)
}

/// Five-point Dirichlet Laplacian `−Δ` scaled by `1/h²`.
pub fn assemble_dirichlet_laplacian(cs: &CrossSection) -> HermitianOperator<f64> {
    HermitianOperator::new(
        link_form::<f64>(cs, None, SliceBoundary::Dirichlet),
        Symmetry::RealSymmetric,
        cross_meta(cs),
    )
}

/// Neumann (natural boundary) Laplacian on the mask.
pub fn assemble_neumann_laplacian(cs: &CrossSection) -> HermitianOperator<f64> {
    HermitianOperator::new(
        link_form::<f64>(cs, None, SliceBoundary::Neumann),
        Symmetry::RealSymmetric,
        cross_meta(cs),
    )
}

/// Real antisymmetric `K = t₂D₃ − t₃D₂` with centered differences, the discrete ∂_α.
pub fn angular_derivative(cs: &CrossSection) -> CsrMatrix<f64> {
    let c = 0.5 / cs.h();
    let mut trip = Vec::with_capacity(4 * cs.len());
    for (p, &(t2, t3)) in cs.coords().iter().enumerate() {
        let nb = cs.neighbors()[p];
        for (dir, coef) in [
            (NORTH, t2 * c),
            (SOUTH, -t2 * c),
            (EAST, -t3 * c),
            (WEST, t3 * c),
        ] {
            if nb[dir] != OUTSIDE {
                trip.push((p, nb[dir], coef));
            }
        }
    }
    CsrMatrix::from_triplets(cs.len(), trip)
}

/// `KᵀK`, the discrete `−∂_α²`.
pub fn angular_square(k: &CsrMatrix<f64>) -> CsrMatrix<f64> {
    k.adjoint().matmul(k)
}

/// Hermitian angular momentum `L = −i∂_α`.
///
/// The symmetrized product `(t₂D₃ + D₃t₂)/2` equals `t₂D₃` exactly on the grid because
/// `t₂` is constant along the t₃ stencil, so `L = −iK`.
pub fn assemble_angular_momentum(cs: &CrossSection) -> HermitianOperator<Complex64> {
    let k = angular_derivative(cs);
    let m = CsrMatrix::from_triplets(
        cs.len(),
        k.triplets()
            .map(|(r, c, v)| (r, c, Complex64::new(0.0, -v)))
            .collect(),
    );
    HermitianOperator::new(m, Symmetry::ComplexHermitian, cross_meta(cs))
}

/// `h_{β₀} = −Δ + β₀² LᴴL`.
pub fn assemble_h_beta0(cs: &CrossSection, beta0: f64) -> HermitianOperator<f64> {
    let lap = assemble_dirichlet_laplacian(cs);
    if beta0 == 0.0 {
        return lap;
    }
    let k = angular_derivative(cs);
    let ktk = angular_square(&k);
    HermitianOperator::new(
        CsrMatrix::linear_combination(&[(1.0, &lap.matrix), (beta0 * beta0, &ktk)]),
        Symmetry::RealSymmetric,
        cross_meta(cs),
    )
}

/// Floquet fiber `−Δ + (p + β₀L)² = h_{β₀} + p² + 2pβ₀L`.
pub fn assemble_fiber(cs: &CrossSection, beta0: f64, p: f64) -> HermitianOperator<Complex64> {
    let h = assemble_h_beta0(cs, beta0).to_complex();
    if p == 0.0 {
        return h;
    }
    let id = CsrMatrix::<Complex64>::identity(cs.len());
    let mut terms = vec![(Complex64::new(1.0, 0.0), &h.matrix), (Complex64::new(p * p, 0.0), &id)];
    let l = assemble_angular_momentum(cs);
    if beta0 != 0.0 {
        terms.push((Complex64::new(2.0 * p * beta0, 0.0), &l.matrix));
    }
    let symmetry = if beta0 != 0.0 {
        Symmetry::ComplexHermitian
    } else {
        Symmetry::RealSymmetric
    };
    HermitianOperator::new(CsrMatrix::linear_combination(&terms), symmetry, cross_meta(cs))
}

/// Magnetic slice operator `(i∇ + a)²` with the potential evaluated at link midpoints.
pub fn assemble_magnetic_slice(
    cs: &CrossSection,
    a: &dyn Fn(f64, f64) -> [f64; 2],
    bc: SliceBoundary,
) -> HermitianOperator<Complex64> {
    HermitianOperator::new(
        link_form::<Complex64>(cs, Some(a), bc),
        Symmetry::ComplexHermitian,
        cross_meta(cs),
    )
}

/// Magnetic Neumann slice operator from potential samples on the mask; link values are
/// endpoint averages.
pub fn assemble_magnetic_slice_neumann(
    cs: &CrossSection,
    a2: &[f64],
    a3: &[f64],
) -> Result<HermitianOperator<Complex64>> {
    if a2.len() != cs.len() || a3.len() != cs.len() {
        return Err(Error::InvalidArgument(format!(
            "potential samples must have length {}, got {} and {}",
            cs.len(),
            a2.len(),
            a3.len()
        )));
    }
    let h = cs.h();
    let ih = 1.0 / h;
    let nb = cs.neighbors();
    let mut trip: Vec<(usize, usize, Complex64)> = Vec::with_capacity(5 * cs.len());
    for p in 0..cs.len() {
        for (dir, a) in [(EAST, a2), (NORTH, a3)] {
            let q = nb[p][dir];
            if q == OUTSIDE {
                continue;
            }
            let am = 0.5 * (a[p] + a[q]);
            let self_term = ih * ih + 0.25 * am * am;
            let re = -ih * ih + 0.25 * am * am;
            trip.push((p, p, Complex64::new(self_term, 0.0)));
            trip.push((q, q, Complex64::new(self_term, 0.0)));
            trip.push((p, q, Complex64::new(re, am * ih)));
            trip.push((q, p, Complex64::new(re, -am * ih)));
        }
    }
    Ok(HermitianOperator::new(
        CsrMatrix::from_triplets(cs.len(), trip),
        Symmetry::ComplexHermitian,
        cross_meta(cs),
    ))
}

/// Diagonal matrix of weights.
pub fn assemble_weighted_mass(cs: &CrossSection, w: &[f64]) -> Result<HermitianOperator<f64>> {
    if w.len() != cs.len() {
        return Err(Error::InvalidArgument(format!(
            "weight must have length {}, got {}",
            cs.len(),
            w.len()
        )));
    }
    if let Some((index, &value)) = w
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v.is_finite() && v > 0.0))
    {
        return Err(Error::NonPositiveWeight { index, value });
    }
    Ok(HermitianOperator::new(
        CsrMatrix::diagonal_from(w),
        Symmetry::RealSymmetric,
        cross_meta(cs),
    ))
}

/// Uniform interior grid on `(−L, L)` with Dirichlet ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SGrid {
    half_length: f64,
    n_s: usize,
}

impl SGrid {
    pub fn new(half_length: f64, n_s: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "truncation half-length must be positive, got {half_length}"
            )));
        }
        if n_s < 16 {
            return Err(Error::InvalidArgument(format!(
                "need at least 16 interior s-points, got {n_s}"
            )));
        }
        Ok(Self { half_length, n_s })
    }

    /// Grid whose spacing is the closest to `ds` with `2L/Δs` integral.
    pub fn with_spacing(half_length: f64, ds: f64) -> Result<Self> {
        if !(ds.is_finite() && ds > 0.0) {
            return Err(Error::InvalidArgument(format!("s-spacing must be positive, got {ds}")));
        }
        let cells = (2.0 * half_length / ds).round().max(1.0) as usize;
        Self::new(half_length, cells.saturating_sub(1))
    }

    #[inline]
    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    #[inline]
    pub fn n_s(&self) -> usize {
        self.n_s
    }

    #[inline]
    pub fn ds(&self) -> f64 {
        2.0 * self.half_length / (self.n_s + 1) as f64
    }

    /// Position of interior point `j`.
    #[inline]
    pub fn s(&self, j: usize) -> f64 {
        -self.half_length + (j + 1) as f64 * self.ds()
    }

    /// Midpoint of the link between points `l − 1` and `l` (`l = 0..=n_s`, ends are ghosts).
    #[inline]
    pub fn link_mid(&self, l: usize) -> f64 {
        -self.half_length + (l as f64 + 0.5) * self.ds()
    }
}

/// `y ← y + alpha·K x` for a real matrix acting on any scalar field.
#[inline]
fn real_apply_add<T: Scalar>(k: &CsrMatrix<f64>, alpha: f64, x: &[T], y: &mut [T]) {
    for (r, out) in y.iter_mut().enumerate() {
        let mut acc = T::zero();
        for (c, v) in k.row(r) {
            acc += x[c] * T::from_re(v);
        }
        *out += acc * T::from_re(alpha);
    }
}

/// Discrete tube form on `[−L, L] × ω`:
/// `Σ_j Q_slice(s_j)[v_j] + Σ_links |(v_{j+1} − v_j)/Δs + θ̇(s_{j+½}) K (v_j + v_{j+1})/2|²`.
///
/// Unknowns are ordered slice by slice (`j·n_cross + p`). The operator is applied
/// without assembling the coupling blocks; [`to_csr`](Self::to_csr) assembles the same
/// matrix explicitly.
#[derive(Clone, Debug)]
pub struct TubeOperator<T> {
    h: f64,
    n_cross: usize,
    sgrid: SGrid,
    slice_mats: Vec<CsrMatrix<T>>,
    slice_of: Vec<usize>,
    k: CsrMatrix<f64>,
    ktk_diag: Vec<f64>,
    link_rate: Vec<f64>,
    diag: Vec<f64>,
    norm1: f64,
    symmetry: Symmetry,
}

impl<T: Scalar> TubeOperator<T> {
    fn build(
        cs: &CrossSection,
        twist: &TwistProfile,
        sgrid: SGrid,
        slice_mats: Vec<CsrMatrix<T>>,
        slice_of: Vec<usize>,
        symmetry: Symmetry,
    ) -> Self {
        let k = angular_derivative(cs);
        let ktk = angular_square(&k);
        let ktk_diag = ktk.diagonal();
        let link_rate: Vec<f64> = (0..=sgrid.n_s())
            .map(|l| twist.theta_dot(sgrid.link_mid(l)))
            .collect();
        let n_cross = cs.len();
        let mut op = Self {
            h: cs.h(),
            n_cross,
            sgrid,
            slice_mats,
            slice_of,
            k,
            ktk_diag,
            link_rate,
            diag: Vec::new(),
            norm1: 0.0,
            symmetry,
        };
        let ids2 = 1.0 / (sgrid.ds() * sgrid.ds());
        let mut diag = Vec::with_capacity(n_cross * sgrid.n_s());
        for j in 0..sgrid.n_s() {
            let s_mat = &op.slice_mats[op.slice_of[j]];
            let (b0, b1) = (op.link_rate[j], op.link_rate[j + 1]);
            let w = 0.25 * (b0 * b0 + b1 * b1);
            for p in 0..n_cross {
                diag.push(s_mat.get(p, p).re() + 2.0 * ids2 + w * op.ktk_diag[p]);
            }
        }
        op.diag = diag;
        op.norm1 = op.exact_norm1(&ktk);
        op
    }

    fn coupling_block(&self, ktk: &CsrMatrix<f64>, b: f64, upper: bool) -> CsrMatrix<T> {
        let ds = self.sgrid.ds();
        let id = CsrMatrix::<f64>::identity(self.n_cross);
        let sign = if upper { -1.0 } else { 1.0 };
        let m = CsrMatrix::linear_combination(&[
            (-1.0 / (ds * ds), &id),
            (sign * b / ds, &self.k),
            (0.25 * b * b, ktk),
        ]);
        CsrMatrix::from_triplets(
            self.n_cross,
            m.triplets().map(|(r, c, v)| (r, c, T::from_re(v))).collect(),
        )
    }

    fn diagonal_block(&self, ktk: &CsrMatrix<f64>, j: usize) -> CsrMatrix<T> {
        let ds = self.sgrid.ds();
        let (b0, b1) = (self.link_rate[j], self.link_rate[j + 1]);
        let id = CsrMatrix::<f64>::identity(self.n_cross);
        let real = CsrMatrix::linear_combination(&[
            (2.0 / (ds * ds), &id),
            (0.25 * (b0 * b0 + b1 * b1), ktk),
        ]);
        let real_t = CsrMatrix::from_triplets(
            self.n_cross,
            real.triplets().map(|(r, c, v)| (r, c, T::from_re(v))).collect(),
        );
        CsrMatrix::linear_combination(&[
            (T::one(), &real_t),
            (T::one(), &self.slice_mats[self.slice_of[j]]),
        ])
    }

    fn exact_norm1(&self, ktk: &CsrMatrix<f64>) -> f64 {
        let n_s = self.sgrid.n_s();
        let row_abs = |m: &CsrMatrix<T>, out: &mut [f64]| {
            for (r, o) in out.iter_mut().enumerate() {
                *o += m.row(r).map(|(_, v)| v.abs2().sqrt()).sum::<f64>();
            }
        };
        let mut best = 0.0f64;
        let mut sums = vec![0.0; self.n_cross];
        for j in 0..n_s {
            sums.iter_mut().for_each(|v| *v = 0.0);
            row_abs(&self.diagonal_block(ktk, j), &mut sums);
            if j > 0 {
                row_abs(&self.coupling_block(ktk, self.link_rate[j], false), &mut sums);
            }
            if j + 1 < n_s {
                row_abs(&self.coupling_block(ktk, self.link_rate[j + 1], true), &mut sums);
            }
            best = sums.iter().copied().fold(best, f64::max);
        }
        best
    }

    pub fn sgrid(&self) -> SGrid {
        self.sgrid
    }

    pub fn n_cross(&self) -> usize {
        self.n_cross
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    /// Explicit sparse matrix of the same form.
    pub fn to_csr(&self) -> HermitianOperator<T> {
        let n_s = self.sgrid.n_s();
        let nc = self.n_cross;
        let ktk = angular_square(&self.k);
        let mut trip = Vec::new();
        for j in 0..n_s {
            for (r, c, v) in self.diagonal_block(&ktk, j).triplets() {
                trip.push((j * nc + r, j * nc + c, v));
            }
            if j + 1 < n_s {
                let b = self.link_rate[j + 1];
                for (r, c, v) in self.coupling_block(&ktk, b, true).triplets() {
                    trip.push((j * nc + r, (j + 1) * nc + c, v));
                }
                for (r, c, v) in self.coupling_block(&ktk, b, false).triplets() {
                    trip.push(((j + 1) * nc + r, j * nc + c, v));
                }
            }
        }
        HermitianOperator::new(
            CsrMatrix::from_triplets(n_s * nc, trip),
            self.symmetry,
            GridMeta {
                h: self.h,
                n_cross: nc,
                sgrid: Some(self.sgrid),
            },
        )
    }

    fn apply_column(&self, x: &[T], y: &mut [T], avg: &mut [T], r: &mut [T]) {
        let nc = self.n_cross;
        let n_s = self.sgrid.n_s();
        let ds = self.sgrid.ds();
        let ids = 1.0 / ds;
        for j in 0..n_s {
            self.slice_mats[self.slice_of[j]].apply(&x[j * nc..(j + 1) * nc], &mut y[j * nc..(j + 1) * nc]);
        }
        let half = T::from_re(0.5);
        let t_ids = T::from_re(ids);
        for l in 0..=n_s {
            let b = self.link_rate[l];
            let left = (l >= 1).then(|| &x[(l - 1) * nc..l * nc]);
            let right = (l < n_s).then(|| &x[l * nc..(l + 1) * nc]);
            for p in 0..nc {
                let xl = left.map_or(T::zero(), |v| v[p]);
                let xr = right.map_or(T::zero(), |v| v[p]);
                avg[p] = (xl + xr) * half;
                r[p] = (xr - xl) * t_ids;
            }
            if b != 0.0 {
                real_apply_add(&self.k, b, avg, r);
            }
            // Gᴴ r: right slice gets r/Δs − (b/2) K r, left slice gets −r/Δs − (b/2) K r.
            avg.iter_mut().for_each(|v| *v = T::zero());
            if b != 0.0 {
                real_apply_add(&self.k, -0.5 * b, r, avg);
            }
            if l < n_s {
                let yr = &mut y[l * nc..(l + 1) * nc];
                for p in 0..nc {
                    yr[p] += r[p] * t_ids + avg[p];
                }
            }
            if l >= 1 {
                let yl = &mut y[(l - 1) * nc..l * nc];
                for p in 0..nc {
                    yl[p] += avg[p] - r[p] * t_ids;
                }
            }
        }
    }
}

impl<T: Scalar> LinearOperator<T> for TubeOperator<T> {
    fn dim(&self) -> usize {
        self.n_cross * self.sgrid.n_s()
    }

    fn apply_block(&self, x: &Block<T>, y: &mut Block<T>) {
        let n = self.dim();
        assert_eq!(x.rows(), n);
        assert_eq!(x.cols(), y.cols());
        let nc = self.n_cross;
        #[cfg(feature = "parallel")]
        if rayon::current_num_threads() > 1 && x.cols() > 1 {
            use rayon::prelude::*;
            y.as_mut_slice()
                .par_chunks_mut(n)
                .zip(x.as_slice().par_chunks(n))
                .for_each(|(yc, xc)| {
                    let mut avg = vec![T::zero(); nc];
                    let mut r = vec![T::zero(); nc];
                    self.apply_column(xc, yc, &mut avg, &mut r);
                });
            return;
        }
        let mut avg = vec![T::zero(); nc];
        let mut r = vec![T::zero(); nc];
        for c in 0..x.cols() {
            let (xc, yc) = (x.col(c), y.col_mut(c));
            self.apply_column(xc, yc, &mut avg, &mut r);
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.diag.clone()
    }

    fn norm1(&self) -> f64 {
        self.norm1
    }
}

fn check_truncation(
    twist: &TwistProfile,
    pot: Option<&MagneticPotential>,
    sgrid: &SGrid,
) -> Result<()> {
    let l = sgrid.half_length();
    if l <= twist.s0() {
        return Err(Error::TruncationTooShort(format!(
            "L = {l} does not exceed the twist perturbation support s0 = {}",
            twist.s0()
        )));
    }
    if let Some(p) = pot {
        if l <= p.s_extent() {
            return Err(Error::TruncationTooShort(format!(
                "L = {l} does not exceed the potential support half-length {}",
                p.s_extent()
            )));
        }
    }
    Ok(())
}

/// Field-free tube operator (real symmetric).
pub fn tube_operator_real(
    cs: &CrossSection,
    twist: &TwistProfile,
    sgrid: SGrid,
) -> Result<TubeOperator<f64>> {
    check_truncation(twist, None, &sgrid)?;
    let lap = link_form::<f64>(cs, None, SliceBoundary::Dirichlet);
    Ok(TubeOperator::build(
        cs,
        twist,
        sgrid,
        vec![lap],
        vec![0; sgrid.n_s()],
        Symmetry::RealSymmetric,
    ))
}

/// Magnetic tube operator (complex Hermitian). Slices outside the potential's
/// s-support share the field-free slice matrix.
pub fn tube_operator_magnetic(
    cs: &CrossSection,
    twist: &TwistProfile,
    pot: &MagneticPotential,
    sgrid: SGrid,
) -> Result<TubeOperator<Complex64>> {
    check_truncation(twist, Some(pot), &sgrid)?;
    let mut mats = vec![link_form::<Complex64>(cs, None, SliceBoundary::Dirichlet)];
    let mut slice_of = Vec::with_capacity(sgrid.n_s());
    let ext = pot.s_extent();
    for j in 0..sgrid.n_s() {
        let s = sgrid.s(j);
        if s.abs() >= ext {
            slice_of.push(0);
            continue;
        }
        let theta = twist.theta(s);
        let a = move |t2: f64, t3: f64| pot.slice_potential(s, theta, t2, t3);
        mats.push(link_form::<Complex64>(cs, Some(&a), SliceBoundary::Dirichlet));
        slice_of.push(mats.len() - 1);
    }
    Ok(TubeOperator::build(
        cs,
        twist,
        sgrid,
        mats,
        slice_of,
        Symmetry::ComplexHermitian,
    ))
}

/// Assembled sparse tube operator; complex in both cases for a uniform interface.
pub fn assemble_tube_operator(
    cs: &CrossSection,
    twist: &TwistProfile,
    pot: Option<&MagneticPotential>,
    sgrid: SGrid,
) -> Result<HermitianOperator<Complex64>> {
    match pot {
        Some(p) => Ok(tube_operator_magnetic(cs, twist, p, sgrid)?.to_csr()),
        None => Ok(tube_operator_real(cs, twist, sgrid)?.to_csr().to_complex()),
    }
}
