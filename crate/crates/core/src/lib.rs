//! Spectral laboratory for the magnetic Dirichlet Laplacian on locally perturbed,
//! periodically twisted tubes.
//!
//! The tube is handled in straightened coordinates `(s, t₂, t₃) ∈ ℝ × ω`. The
//! crate provides:
//!
//! * [`geometry`]: cross-section shapes embedded in a uniform grid, with analytic
//!   distance-to-boundary data;
//! * [`discretize`]: sparse Hermitian assembly of the cross-section operators, the
//!   Floquet fibers and the truncated three-dimensional twisted magnetic form;
//! * [`eigensolve`]: a block preconditioned eigensolver for the lowest eigenpairs;
//! * [`cross_section`]: the threshold `E(β₀)`, ground-state constants, band
//!   functions and the strip Poincaré check;
//! * [`tube`]: twist profiles, magnetic potentials, bound-state probes and the
//!   ground-state factorisation identity;
//! * [`certificate`]: evaluation and parameter search for the explicit sufficient
//!   condition that rules out eigenvalues below the threshold.

pub mod certificate;
pub mod cross_section;
pub mod dense;
pub mod discretize;
pub mod eigensolve;
pub mod error;
pub mod geometry;
pub mod quadrature;
pub mod sparse;
pub mod tube;

mod par;

pub use error::{Error, Result};
pub use num_complex::Complex64;
