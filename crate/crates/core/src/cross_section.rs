//! Threshold `E(β₀)`, ground-state constants, Floquet bands, the Hardy constant and
//! the strip Poincaré check.

use serde::Serialize;

use crate::discretize::{assemble_dirichlet_laplacian, assemble_fiber, assemble_h_beta0};
use crate::eigensolve::{lobpcg, Jacobi, SolverOptions};
use crate::error::{Error, Result};
use crate::eigensolve::generalized_lowest;
use crate::geometry::{CrossSection, ShapeSpec, EAST, NORTH, OUTSIDE, SOUTH, WEST};
use crate::par::map_collect;
use crate::sparse::LinearOperator;

/// Bottom of the spectrum of `h_{β₀}` and its ground state.
#[derive(Clone, Debug, Serialize)]
pub struct ThresholdData {
    #[serde(rename = "E")]
    pub e: f64,
    /// Ground state on the mask, positive, with `h²·Σf² = 1`.
    pub f: Vec<f64>,
    pub beta0: f64,
    pub h: f64,
    /// Second eigenvalue of `h_{β₀}`.
    pub e2: f64,
    pub iterations: usize,
}

/// Constants derived from the ground state `f`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GroundStateConstants {
    /// `min f/τ` over mask points with `τ ≥ 2h`.
    pub alpha0: f64,
    /// `max |Δf|` over points whose 5-point stencil lies in the mask.
    pub lap_f_inf: f64,
    pub f_inf: f64,
    /// `min f²` over the eroded mask `{τ ≥ δ}`.
    pub f_min_on_omega_delta: f64,
    /// Hardy constant used downstream: the refinement extrapolation when the
    /// coarser grids exist, otherwise the value on the current grid.
    pub c0: f64,
    /// Lowest eigenvalue of `(−Δ, 1/τ²)` on the current grid.
    pub c0_grid: f64,
    pub delta: f64,
}

fn solve_lowest<Op: LinearOperator<f64> + ?Sized>(
    op: &Op,
    k: usize,
    tol: f64,
) -> Result<crate::eigensolve::SpectralResult<f64>> {
    let jac = Jacobi::new(&op.diagonal());
    let res = lobpcg(op, &jac, SolverOptions::new(k, tol))?;
    if !res.converged[0] {
        return Err(Error::NotConverged(format!(
            "lowest residual {:.3e} above {:.3e} after {} iterations",
            res.residuals[0], res.threshold, res.iterations
        )));
    }
    Ok(res)
}

/// `E(β₀) = λ₁(h_{β₀})` with the sign-normalized ground state.
pub fn threshold_e(cs: &CrossSection, beta0: f64, tol: f64) -> Result<ThresholdData> {
    let op = assemble_h_beta0(cs, beta0);
    let res = solve_lowest(&op, 2, tol)?;
    let mut f = res.eigenvector(0).to_vec();
    if f[cs.nearest_to_origin()] < 0.0 {
        f.iter_mut().for_each(|v| *v = -*v);
    }
    let norm = (f.iter().map(|v| v * v).sum::<f64>()).sqrt() * cs.h();
    f.iter_mut().for_each(|v| *v /= norm);
    let fmax = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = tol * fmax;
    for (index, v) in f.iter_mut().enumerate() {
        if *v < -cut {
            return Err(Error::SignChange { index, value: *v });
        }
        if *v <= 0.0 {
            *v = v.abs().max(f64::MIN_POSITIVE);
        }
    }
    Ok(ThresholdData {
        e: res.eigenvalues[0],
        f,
        beta0,
        h: cs.h(),
        e2: res.eigenvalues[1],
        iterations: res.iterations,
    })
}

/// 5-point `Δf` at `p`, with zero Dirichlet data outside the mask.
fn laplacian_at(cs: &CrossSection, f: &[f64], p: usize) -> f64 {
    let h2 = cs.h() * cs.h();
    let nb = cs.neighbors()[p];
    let mut acc = -4.0 * f[p];
    for d in [EAST, WEST, NORTH, SOUTH] {
        if nb[d] != OUTSIDE {
            acc += f[nb[d]];
        }
    }
    acc / h2
}

/// Lowest eigenvalue of `−Δ u = c·u/τ_h²` on the grid, with `τ_h` the distance to
/// the nearest exterior grid node (the boundary of the discrete Dirichlet problem).
pub fn hardy_constant(cs: &CrossSection, tol: f64) -> Result<f64> {
    let lap = assemble_dirichlet_laplacian(cs);
    let w: Vec<f64> = cs.grid_boundary_distance().iter().map(|t| 1.0 / (t * t)).collect();
    generalized_lowest(&lap.matrix, &w, tol)
}

/// Grid Hardy constants and their extrapolation to `h → 0`.
#[derive(Clone, Debug, Serialize)]
pub struct HardyExtrapolation {
    /// `(h, c(h))` pairs, coarsest first.
    pub samples: Vec<(f64, f64)>,
    /// Limit of the model `c(h) = c∞ + a/(ln(1/h) + b)²` through the three finest
    /// samples; `None` when the model has no solution.
    pub limit: Option<f64>,
}

impl HardyExtrapolation {
    /// The extrapolated limit if it exists and lies below every sample, else the
    /// smallest sample.
    pub fn value(&self) -> f64 {
        let raw = self.samples.iter().fold(f64::INFINITY, |m, s| m.min(s.1));
        match self.limit {
            Some(l) if l > 0.0 => l.min(raw),
            _ => raw,
        }
    }
}

/// Three-point fit of `c∞ + a/(x + b)²` with `x = ln(1/h)`, returning `c∞`.
pub fn log_square_limit(samples: &[(f64, f64)]) -> Option<f64> {
    if samples.len() < 3 {
        return None;
    }
    let pts = &samples[samples.len() - 3..];
    let x: Vec<f64> = pts.iter().map(|p| (1.0 / p.0).ln()).collect();
    let c: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let residual = |b: f64| {
        let u: Vec<f64> = x.iter().map(|xi| 1.0 / ((xi + b) * (xi + b))).collect();
        let a = (c[0] - c[1]) / (u[0] - u[1]);
        let cinf = c[0] - a * u[0];
        (cinf + a * u[2] - c[2], cinf)
    };
    let xmin = x.iter().cloned().fold(f64::INFINITY, f64::min);
    // Scan b over (−x_min, 200] on a geometric grid of offsets, then bisect.
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=400 {
        let off = 1e-3 * (2e5f64).powf(i as f64 / 400.0);
        let b = -xmin + off;
        let (r, _) = residual(b);
        if !r.is_finite() {
            continue;
        }
        if let Some((pb, pr)) = prev {
            if pr.signum() != r.signum() {
                let (mut lo, mut hi, mut rlo) = (pb, b, pr);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let (rm, _) = residual(mid);
                    if rm.signum() == rlo.signum() {
                        lo = mid;
                        rlo = rm;
                    } else {
                        hi = mid;
                    }
                }
                return Some(residual(0.5 * (lo + hi)).1);
            }
        }
        prev = Some((b, r));
    }
    None
}

/// Hardy constants on the grids `hs` (coarsest first) and their extrapolation.
pub fn hardy_extrapolation(shape: ShapeSpec, hs: &[f64], tol: f64) -> Result<HardyExtrapolation> {
    let values = map_collect(hs.to_vec(), |h| {
        CrossSection::build(shape, h).and_then(|cs| hardy_constant(&cs, tol))
    });
    let mut samples = Vec::with_capacity(hs.len());
    for (&h, v) in hs.iter().zip(values) {
        samples.push((h, v?));
    }
    let limit = log_square_limit(&samples);
    Ok(HardyExtrapolation { samples, limit })
}

/// Constants of `td.f` on `cs` with erosion depth `delta`.
///
/// `c0` is extrapolated from the grids `2h, h, h/2` when `2h` still resolves the shape.
pub fn ground_state_constants(
    td: &ThresholdData,
    cs: &CrossSection,
    delta: f64,
) -> Result<GroundStateConstants> {
    if td.f.len() != cs.len() {
        return Err(Error::InvalidArgument(format!(
            "ground state has {} entries, mask has {}",
            td.f.len(),
            cs.len()
        )));
    }
    let eroded = cs.erode(delta)?;
    let h = cs.h();
    let f = &td.f;
    let tau = cs.tau();

    let mut alpha0 = f64::INFINITY;
    for (p, &t) in tau.iter().enumerate() {
        if t >= 2.0 * h {
            alpha0 = alpha0.min(f[p] / t);
        }
    }
    if !alpha0.is_finite() {
        // Grid too thin for the 2h rule; fall back to all points.
        alpha0 = f.iter().zip(tau).map(|(v, t)| v / t).fold(f64::INFINITY, f64::min);
    }
    let lap_f_inf = (0..cs.len())
        .filter(|&p| cs.has_full_stencil(p))
        .map(|p| laplacian_at(cs, f, p).abs())
        .fold(0.0f64, f64::max);
    let f_inf = f.iter().cloned().fold(0.0f64, f64::max);
    let f_min_on_omega_delta = f
        .iter()
        .zip(&eroded)
        .filter(|(_, &keep)| keep)
        .map(|(v, _)| v * v)
        .fold(f64::INFINITY, f64::min);

    let tol = 1e-10;
    let c0_grid = hardy_constant(cs, tol)?;
    let shape = cs.shape();
    let c0 = if shape.min_diameter() / (2.0 * h) >= 8.0 {
        let other = map_collect(vec![2.0 * h, 0.5 * h], |hh| {
            CrossSection::build_with_offset(shape, hh, cs.offset())
                .and_then(|g| hardy_constant(&g, tol))
        });
        let mut it = other.into_iter();
        let coarse = it.next().unwrap()?;
        let fine = it.next().unwrap()?;
        let samples = vec![(2.0 * h, coarse), (h, c0_grid), (0.5 * h, fine)];
        let limit = log_square_limit(&samples);
        HardyExtrapolation { samples, limit }.value()
    } else {
        c0_grid
    };

    Ok(GroundStateConstants {
        alpha0,
        lap_f_inf,
        f_inf,
        f_min_on_omega_delta,
        c0,
        c0_grid,
        delta,
    })
}

/// Lowest band `E₁(p)` sampled on a grid, with its minimum.
#[derive(Clone, Debug, Serialize)]
pub struct BandData {
    pub beta0: f64,
    pub points: Vec<(f64, f64)>,
    pub p_min: f64,
    pub e_min: f64,
}

/// `E₁(p) = λ₁(fiber(p))` for every `p` in `p_grid`.
pub fn band_function(cs: &CrossSection, beta0: f64, p_grid: &[f64], tol: f64) -> Result<BandData> {
    if p_grid.is_empty() {
        return Err(Error::InvalidArgument("empty p grid".into()));
    }
    let scale = p_grid.iter().fold(1.0f64, |m, p| m.max(p.abs()));
    let eps = 1e-12 * scale;
    if !p_grid.iter().any(|p| p.abs() <= eps) {
        return Err(Error::InvalidArgument("p grid must contain 0".into()));
    }
    for &p in p_grid {
        if !p_grid.iter().any(|q| (q + p).abs() <= eps) {
            return Err(Error::InvalidArgument(format!(
                "p grid is not symmetric about 0: {p} has no mirror"
            )));
        }
    }
    let values = map_collect(p_grid.to_vec(), |p| -> Result<f64> {
        let op = assemble_fiber(cs, beta0, p);
        let jac = Jacobi::new(&op.diagonal());
        let res = lobpcg(&op, &jac, SolverOptions::new(2, tol))?;
        if !res.converged[0] {
            return Err(Error::NotConverged(format!("fiber at p = {p}")));
        }
        Ok(res.eigenvalues[0])
    });
    let mut points = Vec::with_capacity(p_grid.len());
    for (&p, v) in p_grid.iter().zip(values) {
        points.push((p, v?));
    }
    let (p_min, e_min) = points
        .iter()
        .cloned()
        .fold((f64::NAN, f64::INFINITY), |best, pt| if pt.1 < best.1 { pt } else { best });
    Ok(BandData {
        beta0,
        points,
        p_min,
        e_min,
    })
}

/// Dirichlet ground state of a `4δ × δ` strip.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StripCheck {
    pub delta: f64,
    pub h: f64,
    pub lambda1: f64,
    /// `λ₁δ²`.
    pub product: f64,
    /// `(λ₁ − π²/(4δ)²)·δ²`, the product with the long-side contribution removed.
    pub product_transverse: f64,
}

/// Lowest Dirichlet eigenvalue of the strip `rectangle(4δ, δ)` at spacing `h ≤ δ/16`.
pub fn strip_poincare_check(delta: f64, h: f64) -> Result<StripCheck> {
    if !(delta > 0.0 && h > 0.0 && h <= delta / 16.0 * (1.0 + 1e-12)) {
        return Err(Error::InvalidArgument(format!(
            "strip check needs 0 < h <= delta/16, got h = {h}, delta = {delta}"
        )));
    }
    let cs = CrossSection::build(ShapeSpec::rectangle(4.0 * delta, delta), h)?;
    let lap = assemble_dirichlet_laplacian(&cs);
    let res = solve_lowest(&lap, 1, 1e-10)?;
    let lambda1 = res.eigenvalues[0];
    let long = std::f64::consts::PI / (4.0 * delta);
    Ok(StripCheck {
        delta,
        h,
        lambda1,
        product: lambda1 * delta * delta,
        product_transverse: (lambda1 - long * long) * delta * delta,
    })
}

/// Strip checks over a δ sweep, run concurrently.
pub fn strip_sweep(deltas: &[f64]) -> Result<Vec<StripCheck>> {
    map_collect(deltas.to_vec(), |d| strip_poincare_check(d, d / 16.0))
        .into_iter()
        .collect()
}

/// Lemma constant `C`: the smallest transverse strip product over the sweep, halved.
pub fn lemma_constant(checks: &[StripCheck]) -> f64 {
    checks
        .iter()
        .map(|c| c.product_transverse)
        .fold(f64::INFINITY, f64::min)
        / 2.0
}
