//! Cross-section shapes and their embedding in a uniform grid.
//!
//! Grid points sit at `(i·h + ox, j·h + oy)` for integers `i, j`; the offset is zero
//! unless a translated grid is requested. A point belongs to the mask when it lies
//! strictly inside the analytic shape, so Dirichlet conditions are imposed by exclusion.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Origin-centered planar domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec {
    /// Semi-axes `a` (along t₂) and `b` (along t₃).
    Ellipse { a: f64, b: f64 },
    /// Full side lengths `w` (along t₂) and `h` (along t₃).
    Rectangle { w: f64, h: f64 },
    /// Boundary `r(φ) = r0·(1 + amp·cos(lobes·φ))`.
    ParametricStar { r0: f64, amp: f64, lobes: u32 },
}

impl ShapeSpec {
    pub fn ellipse(a: f64, b: f64) -> Self {
        Self::Ellipse { a, b }
    }

    pub fn rectangle(w: f64, h: f64) -> Self {
        Self::Rectangle { w, h }
    }

    pub fn star(r0: f64, amp: f64, lobes: u32) -> Self {
        Self::ParametricStar { r0, amp, lobes }
    }

    /// Builds a shape from the config representation `kind` + positional `params`.
    pub fn from_kind_params(kind: &str, params: &[f64]) -> Result<Self> {
        let need = |n: usize| -> Result<()> {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidShape(format!(
                    "{kind} takes {n} parameters, got {}",
                    params.len()
                )))
            }
        };
        let shape = match kind {
            "ellipse" => {
                need(2)?;
                Self::ellipse(params[0], params[1])
            }
            "rectangle" => {
                need(2)?;
                Self::rectangle(params[0], params[1])
            }
            "parametric_star" => {
                need(3)?;
                let lobes = params[2];
                if lobes.fract() != 0.0 || lobes < 0.0 {
                    return Err(Error::InvalidShape(format!(
                        "lobes must be a non-negative integer, got {lobes}"
                    )));
                }
                Self::star(params[0], params[1], lobes as u32)
            }
            other => return Err(Error::InvalidShape(format!("unknown shape kind '{other}'"))),
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Ellipse { .. } => "ellipse",
            Self::Rectangle { .. } => "rectangle",
            Self::ParametricStar { .. } => "parametric_star",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Self::Ellipse { a, b } => vec![a, b],
            Self::Rectangle { w, h } => vec![w, h],
            Self::ParametricStar { r0, amp, lobes } => vec![r0, amp, lobes as f64],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidShape(format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            Self::Ellipse { a, b } => {
                positive("a", a)?;
                positive("b", b)
            }
            Self::Rectangle { w, h } => {
                positive("w", w)?;
                positive("h", h)
            }
            Self::ParametricStar { r0, amp, lobes } => {
                positive("r0", r0)?;
                if !(0.0..0.5).contains(&amp) {
                    return Err(Error::InvalidShape(format!("amp must lie in [0, 0.5), got {amp}")));
                }
                if lobes < 2 {
                    return Err(Error::InvalidShape(format!("lobes must be >= 2, got {lobes}")));
                }
                Ok(())
            }
        }
    }

    /// Strict interior test.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        const EPS: f64 = 1e-12;
        match *self {
            Self::Ellipse { a, b } => (x / a).powi(2) + (y / b).powi(2) < 1.0 - EPS,
            Self::Rectangle { w, h } => x.abs() < 0.5 * w - EPS && y.abs() < 0.5 * h - EPS,
            Self::ParametricStar { .. } => {
                let rho = x.hypot(y);
                rho < self.star_radius(y.atan2(x)) - EPS
            }
        }
    }

    fn star_radius(&self, phi: f64) -> f64 {
        match *self {
            Self::ParametricStar { r0, amp, lobes } => r0 * (1.0 + amp * (lobes as f64 * phi).cos()),
            _ => unreachable!(),
        }
    }

    /// Euclidean distance from an interior point to the boundary.
    pub fn boundary_distance(&self, x: f64, y: f64) -> f64 {
        match *self {
            Self::Ellipse { a, b } => {
                if a >= b {
                    ellipse_distance(a, b, x.abs(), y.abs())
                } else {
                    ellipse_distance(b, a, y.abs(), x.abs())
                }
            }
            Self::Rectangle { w, h } => (0.5 * w - x.abs()).min(0.5 * h - y.abs()),
            Self::ParametricStar { .. } => self.star_distance(x, y),
        }
    }

    fn star_distance(&self, x: f64, y: f64) -> f64 {
        const SAMPLES: usize = 720;
        let dist2 = |phi: f64| {
            let r = self.star_radius(phi);
            (r * phi.cos() - x).powi(2) + (r * phi.sin() - y).powi(2)
        };
        let step = 2.0 * PI / SAMPLES as f64;
        let mut vals: Vec<(f64, f64)> = (0..SAMPLES)
            .map(|i| {
                let phi = i as f64 * step;
                (dist2(phi), phi)
            })
            .collect();
        vals.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut best = f64::INFINITY;
        for &(_, phi) in vals.iter().take(4) {
            best = best.min(golden_min(&dist2, phi - step, phi + step, 1e-13));
        }
        best.sqrt()
    }

    /// `sup |t|` over the shape.
    pub fn sup_radius(&self) -> f64 {
        match *self {
            Self::Ellipse { a, b } => a.max(b),
            Self::Rectangle { w, h } => 0.5 * w.hypot(h),
            Self::ParametricStar { r0, amp, .. } => r0 * (1.0 + amp),
        }
    }

    /// Lower bound on the width of the shape in any direction.
    pub fn min_diameter(&self) -> f64 {
        match *self {
            Self::Ellipse { a, b } => 2.0 * a.min(b),
            Self::Rectangle { w, h } => w.min(h),
            Self::ParametricStar { r0, amp, .. } => 2.0 * r0 * (1.0 - amp),
        }
    }

    /// Half extents of an axis-aligned bounding box.
    pub fn half_extent(&self) -> (f64, f64) {
        match *self {
            Self::Ellipse { a, b } => (a, b),
            Self::Rectangle { w, h } => (0.5 * w, 0.5 * h),
            Self::ParametricStar { .. } => {
                let r = self.sup_radius();
                (r, r)
            }
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Self::Ellipse { a, b } => PI * a * b,
            Self::Rectangle { w, h } => w * h,
            Self::ParametricStar { r0, amp, .. } => PI * r0 * r0 * (1.0 + 0.5 * amp * amp),
        }
    }

    /// True iff the shape is invariant under every rotation about the origin.
    pub fn is_rotationally_symmetric(&self) -> bool {
        match *self {
            Self::Ellipse { a, b } => a == b,
            Self::Rectangle { .. } => false,
            Self::ParametricStar { amp, .. } => amp == 0.0,
        }
    }
}

/// Distance from `(y0, y1)` (first quadrant, inside or outside) to the ellipse with
/// semi-axes `e0 ≥ e1`, by bisection on the Lagrange parameter.
fn ellipse_distance(e0: f64, e1: f64, y0: f64, y1: f64) -> f64 {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g == 0.0 {
                return 0.0;
            }
            let r0 = (e0 / e1).powi(2);
            let sbar = ellipse_root(r0, z0, z1, g);
            let x0 = r0 * y0 / (sbar + r0);
            let x1 = y1 / (sbar + 1.0);
            (x0 - y0).hypot(x1 - y1)
        } else {
            (y1 - e1).abs()
        }
    } else {
        let numer0 = e0 * y0;
        let denom0 = e0 * e0 - e1 * e1;
        if numer0 < denom0 {
            let xde0 = numer0 / denom0;
            let x0 = e0 * xde0;
            let x1 = e1 * (1.0 - xde0 * xde0).sqrt();
            (x0 - y0).hypot(x1)
        } else {
            (y0 - e0).abs()
        }
    }
}

fn ellipse_root(r0: f64, z0: f64, z1: f64, mut g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
    let mut s = 0.0;
    for _ in 0..1100 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let ratio0 = n0 / (s + r0);
        let ratio1 = z1 / (s + 1.0);
        g = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
        if g > 0.0 {
            s0 = s;
        } else if g < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

/// Golden-section minimum value of `f` on `[lo, hi]`.
fn golden_min(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    fc.min(fd).min(f(0.5 * (lo + hi)))
}

/// Lower envelope of parabolas: `out[q] = min_p (f[p] + (q − p)²)`, in grid units.
fn squared_distance_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates from −∞.
                v[0] = q;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    let mut out = vec![0.0; n];
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
    out
}

/// Sentinel for "no interior neighbor".
pub const OUTSIDE: usize = usize::MAX;

/// Direction index into [`CrossSection::neighbors`].
pub const EAST: usize = 0;
pub const WEST: usize = 1;
pub const NORTH: usize = 2;
pub const SOUTH: usize = 3;

/// A shape sampled on a uniform grid.
#[derive(Clone, Debug)]
pub struct CrossSection {
    shape: ShapeSpec,
    h: f64,
    offset: (f64, f64),
    /// Bounding grid: integer coordinates `imin..imin+nx`, `jmin..jmin+ny`.
    imin: i64,
    jmin: i64,
    nx: usize,
    ny: usize,
    /// Row-major over the bounding grid; `OUTSIDE` for points not in the mask.
    index: Vec<usize>,
    ij: Vec<(i64, i64)>,
    coords: Vec<(f64, f64)>,
    tau: Vec<f64>,
    neighbors: Vec<[usize; 4]>,
    d: f64,
}

impl CrossSection {
    pub fn build(shape: ShapeSpec, h: f64) -> Result<Self> {
        Self::build_with_offset(shape, h, (0.0, 0.0))
    }

    /// Same as [`build`](Self::build) with the grid shifted by `offset`.
    pub fn build_with_offset(shape: ShapeSpec, h: f64, offset: (f64, f64)) -> Result<Self> {
        shape.validate()?;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidArgument(format!("grid spacing must be positive, got {h}")));
        }
        let across = shape.min_diameter() / h;
        if across < 8.0 {
            return Err(Error::GridTooCoarse {
                points: across,
            });
        }
        let (ex, ey) = shape.half_extent();
        let mx = ((ex + offset.0.abs()) / h).ceil() as i64 + 1;
        let my = ((ey + offset.1.abs()) / h).ceil() as i64 + 1;
        let (imin, jmin) = (-mx, -my);
        let nx = (2 * mx + 1) as usize;
        let ny = (2 * my + 1) as usize;
        let mut index = vec![OUTSIDE; nx * ny];
        let mut ij = Vec::new();
        let mut coords = Vec::new();
        for a in 0..ny {
            for b in 0..nx {
                let i = imin + b as i64;
                let j = jmin + a as i64;
                let x = i as f64 * h + offset.0;
                let y = j as f64 * h + offset.1;
                if shape.contains(x, y) {
                    index[a * nx + b] = ij.len();
                    ij.push((i, j));
                    coords.push((x, y));
                }
            }
        }
        if ij.is_empty() {
            return Err(Error::EmptyMask);
        }
        let tau: Vec<f64> = coords
            .iter()
            .map(|&(x, y)| shape.boundary_distance(x, y))
            .collect();
        let mut cs = Self {
            shape,
            h,
            offset,
            imin,
            jmin,
            nx,
            ny,
            index,
            ij,
            coords,
            tau,
            neighbors: Vec::new(),
            d: shape.sup_radius(),
        };
        cs.neighbors = (0..cs.len())
            .map(|p| {
                let (i, j) = cs.ij[p];
                [
                    cs.lookup(i + 1, j),
                    cs.lookup(i - 1, j),
                    cs.lookup(i, j + 1),
                    cs.lookup(i, j - 1),
                ]
            })
            .collect();
        let components = cs.count_components();
        if components != 1 {
            return Err(Error::DisconnectedMask { components });
        }
        Ok(cs)
    }

    fn lookup(&self, i: i64, j: i64) -> usize {
        let b = i - self.imin;
        let a = j - self.jmin;
        if b < 0 || a < 0 || b as usize >= self.nx || a as usize >= self.ny {
            return OUTSIDE;
        }
        self.index[a as usize * self.nx + b as usize]
    }

    fn count_components(&self) -> usize {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(p) = queue.pop_front() {
                for &q in &self.neighbors[p] {
                    if q != OUTSIDE && !seen[q] {
                        seen[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
        count
    }

    pub fn shape(&self) -> ShapeSpec {
        self.shape
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn offset(&self) -> (f64, f64) {
        self.offset
    }

    /// Number of interior points.
    #[inline]
    pub fn len(&self) -> usize {
        self.ij.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ij.is_empty()
    }

    pub fn n_interior(&self) -> usize {
        self.len()
    }

    /// `(t₂, t₃)` of every interior point.
    #[inline]
    pub fn coords(&self) -> &[(f64, f64)] {
        &self.coords
    }

    /// Integer grid indices of every interior point.
    pub fn grid_indices(&self) -> &[(i64, i64)] {
        &self.ij
    }

    /// Analytic distance to the boundary at every interior point.
    #[inline]
    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn max_tau(&self) -> f64 {
        self.tau.iter().copied().fold(0.0, f64::max)
    }

    /// Interior neighbors in the order east, west, north, south; [`OUTSIDE`] when absent.
    #[inline]
    pub fn neighbors(&self) -> &[[usize; 4]] {
        &self.neighbors
    }

    /// `sup |t|` over the analytic shape.
    #[inline]
    pub fn d(&self) -> f64 {
        self.d
    }

    /// Bounding-grid dimensions and the full-grid mask (row-major, t₂ fastest).
    pub fn bounding_mask(&self) -> (usize, usize, Vec<bool>) {
        (
            self.nx,
            self.ny,
            self.index.iter().map(|&k| k != OUTSIDE).collect(),
        )
    }

    /// Interior index of the grid point `(i, j)`, if any.
    pub fn index_of(&self, i: i64, j: i64) -> Option<usize> {
        match self.lookup(i, j) {
            OUTSIDE => None,
            p => Some(p),
        }
    }

    /// Interior point closest to the origin.
    pub fn nearest_to_origin(&self) -> usize {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (p, &(x, y)) in self.coords.iter().enumerate() {
            let r = x * x + y * y;
            if r < dist {
                dist = r;
                best = p;
            }
        }
        best
    }

    /// Samples `f` at every interior point.
    pub fn sample<T>(&self, f: impl Fn(f64, f64) -> T) -> Vec<T> {
        self.coords.iter().map(|&(x, y)| f(x, y)).collect()
    }

    /// True when all four neighbors are interior.
    pub fn has_full_stencil(&self, p: usize) -> bool {
        self.neighbors[p].iter().all(|&q| q != OUTSIDE)
    }

    /// Euclidean distance from every interior point to the nearest grid node outside the
    /// mask, the boundary seen by the discrete Dirichlet problem. Differs from `τ` by at
    /// most `h√2`.
    pub fn grid_boundary_distance(&self) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let inf = 1e30;
        let mut d2: Vec<f64> = self
            .index
            .iter()
            .map(|&k| if k == OUTSIDE { 0.0 } else { inf })
            .collect();
        let mut line = Vec::new();
        for j in 0..ny {
            line.clear();
            line.extend_from_slice(&d2[j * nx..(j + 1) * nx]);
            let out = squared_distance_1d(&line);
            d2[j * nx..(j + 1) * nx].copy_from_slice(&out);
        }
        for i in 0..nx {
            line.clear();
            line.extend((0..ny).map(|j| d2[j * nx + i]));
            let out = squared_distance_1d(&line);
            for j in 0..ny {
                d2[j * nx + i] = out[j];
            }
        }
        self.ij
            .iter()
            .map(|&(i, j)| {
                let k = (j - self.jmin) as usize * nx + (i - self.imin) as usize;
                d2[k].sqrt() * self.h
            })
            .collect()
    }

    /// Mask of interior points with `τ ≥ delta`.
    pub fn erode(&self, delta: f64) -> Result<Vec<bool>> {
        let max_tau = self.max_tau();
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "erosion depth must be positive, got {delta}"
            )));
        }
        if delta >= max_tau {
            return Err(Error::EmptyErosion { delta, max_tau });
        }
        let mask: Vec<bool> = self.tau.iter().map(|&t| t >= delta).collect();
        if !mask.iter().any(|&m| m) {
            return Err(Error::EmptyErosion { delta, max_tau });
        }
        Ok(mask)
    }
}
