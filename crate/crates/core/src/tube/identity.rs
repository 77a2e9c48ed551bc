//! Numerical check of the ground-state factorisation `v = f·g` of the twisted
//! magnetic form.
//!
//! With `f` the ground state of `h_{β₀}` and `θ̇ = β₀ − μ`,
//!
//! ```text
//! Q[fg] − E‖fg‖² = ∫ f² (|i∂₂g + Ãg cosθ|² + |i∂₃g + Ãg sinθ|²)
//!                + ∫ f² |∂_s g + β₀ ∂_α g|² − I_μ ,
//! ```
//!
//! where `I_μ` collects every term carrying `μ`. The left side is evaluated with the
//! discrete slice form applied to `v = f·g` on the grid, the right side term by term
//! with analytic derivatives of `g`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::potential::MagneticPotential;
use super::profile::TwistProfile;
use crate::cross_section::ThresholdData;
use crate::discretize::angular_derivative;
use crate::error::{Error, Result};
use crate::geometry::{CrossSection, EAST, NORTH, OUTSIDE};
use crate::quadrature::gauss_legendre;
use crate::sparse::CsrMatrix;

const BUMP_POWER: i32 = 6;

/// `(1 − x²)^6` on `|x| < 1`, with its first derivative.
fn bump(x: f64) -> (f64, f64) {
    if x.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let u = 1.0 - x * x;
    let p = BUMP_POWER as f64;
    (u.powi(BUMP_POWER), -2.0 * p * x * u.powi(BUMP_POWER - 1))
}

/// Smooth test functions `g(s, t) = B(s/s_width)·R(ρ)·exp(iφ)`, with `ρ` the
/// elliptic radius `√((t₂/a)² + (t₃/b)²)` relative to the shape's half-extents and
/// `φ = phase·(t₂ + t₃/2 + 3s/10)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `R = B(ρ/radius)`.
    Centered { s_width: f64, radius: f64, phase: f64 },
    /// `R = B((ρ − m)/w)` on the annulus `inner < ρ < outer`.
    Annulus { s_width: f64, inner: f64, outer: f64, phase: f64 },
}

impl TestFunction {
    pub fn s_width(&self) -> f64 {
        match *self {
            Self::Centered { s_width, .. } | Self::Annulus { s_width, .. } => s_width,
        }
    }

    fn phase(&self) -> f64 {
        match *self {
            Self::Centered { phase, .. } | Self::Annulus { phase, .. } => phase,
        }
    }

    /// `R` and `dR/dq` with `q = ρ²`.
    fn radial(&self, q: f64) -> (f64, f64) {
        match *self {
            Self::Centered { radius, .. } => {
                let r2 = radius * radius;
                if q >= r2 {
                    return (0.0, 0.0);
                }
                let u = 1.0 - q / r2;
                let p = BUMP_POWER as f64;
                (u.powi(BUMP_POWER), -p / r2 * u.powi(BUMP_POWER - 1))
            }
            Self::Annulus { inner, outer, .. } => {
                let rho = q.sqrt();
                let m = 0.5 * (inner + outer);
                let w = 0.5 * (outer - inner);
                if rho <= inner || rho >= outer {
                    return (0.0, 0.0);
                }
                let (b, db) = bump((rho - m) / w);
                (b, db / (w * 2.0 * rho))
            }
        }
    }
}

/// `g` and its partial derivatives at one point.
#[derive(Clone, Copy, Debug)]
struct Jet {
    g: Complex64,
    gs: Complex64,
    g2: Complex64,
    g3: Complex64,
}

impl Jet {
    fn alpha(&self, t2: f64, t3: f64) -> Complex64 {
        self.g3 * t2 - self.g2 * t3
    }
}

struct Evaluator {
    tf: TestFunction,
    ax: f64,
    ay: f64,
}

impl Evaluator {
    fn jet(&self, s: f64, t2: f64, t3: f64) -> Jet {
        let sw = self.tf.s_width();
        let (bs, dbs) = bump(s / sw);
        let q = (t2 / self.ax).powi(2) + (t3 / self.ay).powi(2);
        let (r, dr) = self.tf.radial(q);
        let k = self.tf.phase();
        let e = Complex64::from_polar(1.0, k * (t2 + 0.5 * t3 + 0.3 * s));
        let i = Complex64::i();
        let base = bs * r;
        let g = e * base;
        let gs = e * (dbs / sw * r + i * 0.3 * k * base);
        let g2 = e * (bs * dr * 2.0 * t2 / (self.ax * self.ax) + i * k * base);
        let g3 = e * (bs * dr * 2.0 * t3 / (self.ay * self.ay) + i * 0.5 * k * base);
        Jet { g, gs, g2, g3 }
    }
}

/// Both sides of the identity and their parts.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityReport {
    /// `Q[fg] − E‖fg‖²` from the discrete form.
    pub lhs: f64,
    /// Right side assembled term by term.
    pub rhs: f64,
    /// `|lhs − rhs| / (|lhs| + |rhs|)`.
    pub discrepancy: f64,
    pub magnetic_term: f64,
    pub longitudinal_term: f64,
    pub i_mu: f64,
    pub h: f64,
    pub n_slices: usize,
}

/// `y = K x` for real `K` and complex `x`.
fn apply_real(k: &CsrMatrix<f64>, x: &[Complex64], y: &mut [Complex64]) {
    for (r, out) in y.iter_mut().enumerate() {
        *out = k.row(r).map(|(c, v)| x[c] * v).sum();
    }
}

/// Evaluates both sides of the factorisation identity for `v = f·g`.
pub fn form_identity_check(
    cs: &CrossSection,
    twist: &TwistProfile,
    pot: Option<&MagneticPotential>,
    td: &ThresholdData,
    g: &TestFunction,
) -> Result<IdentityReport> {
    if td.f.len() != cs.len() {
        return Err(Error::InvalidArgument("ground state does not match the grid".into()));
    }
    if (td.beta0 - twist.beta0()).abs() > 1e-14 * twist.beta0().max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "ground state computed for beta0 = {}, twist has {}",
            td.beta0,
            twist.beta0()
        )));
    }
    let (ax, ay) = cs.shape().half_extent();
    let ev = Evaluator { tf: *g, ax, ay };
    let h = cs.h();
    let coords = cs.coords();
    for (p, &t) in cs.tau().iter().enumerate() {
        if t < 2.0 * h {
            let (x, y) = coords[p];
            let val = ev.jet(0.0, x, y).g.norm();
            if val > 1e-8 {
                return Err(Error::NotCompactlySupported { value: val, tau: t });
            }
        }
    }

    let beta0 = twist.beta0();
    let e = td.e;
    let f = &td.f;
    let n = cs.len();
    let kmat = angular_derivative(cs);
    let kf: Vec<f64> = (0..n).map(|r| kmat.row(r).map(|(c, v)| v * f[c]).sum()).collect();
    let nb = cs.neighbors();
    let field = pot.filter(|p| !p.is_zero());

    let sw = g.s_width();
    let panels = 24;
    let (gx, gw) = gauss_legendre(8);
    let dx = 2.0 * sw / panels as f64;
    let mut s_nodes = Vec::with_capacity(panels * gx.len());
    for k in 0..panels {
        let mid = -sw + (k as f64 + 0.5) * dx;
        for (xi, wi) in gx.iter().zip(&gw) {
            s_nodes.push((mid + 0.5 * dx * xi, 0.5 * dx * wi));
        }
    }

    let h2 = h * h;
    let i = Complex64::i();
    let (mut lhs, mut mag, mut lon, mut imu) = (0.0, 0.0, 0.0, 0.0);
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    let mut kv = vec![Complex64::new(0.0, 0.0); n];
    let mut jets = Vec::with_capacity(n);
    for &(s, ws) in &s_nodes {
        let theta = twist.theta(s);
        let (sn, c) = theta.sin_cos();
        let tdot = twist.theta_dot(s);
        let mu = twist.mu(s);
        jets.clear();
        jets.extend(coords.iter().map(|&(x, y)| ev.jet(s, x, y)));
        for p in 0..n {
            v[p] = jets[p].g * f[p];
        }
        apply_real(&kmat, &v, &mut kv);

        // Left side: discrete slice form, longitudinal term, energy.
        let mut slice = 0.0;
        for p in 0..n {
            let (x, y) = coords[p];
            for (dir, comp, ddx, ddy) in [(EAST, 0usize, 0.5, 0.0), (NORTH, 1usize, 0.0, 0.5)] {
                let q = nb[p][dir];
                if q == OUTSIDE {
                    continue;
                }
                let a = field.map_or(0.0, |pp| pp.slice_potential(s, theta, x + ddx * h, y + ddy * h)[comp]);
                let r = (v[q] - v[p]) / h - i * a * (v[p] + v[q]) * 0.5;
                slice += r.norm_sqr();
            }
            // Exterior links: v vanishes near the boundary, so only the self term
            // remains, and it is zero there.
            let ds_v = jets[p].gs * f[p] + kv[p] * tdot;
            slice += ds_v.norm_sqr() - e * v[p].norm_sqr();
        }
        lhs += ws * h2 * slice;

        // Right side.
        let (mut m_s, mut l_s, mut i_s) = (0.0, 0.0, 0.0);
        for p in 0..n {
            let (x, y) = coords[p];
            let jt = jets[p];
            let fp = f[p];
            let at = field.map_or(0.0, |pp| pp.a_tilde(twist, s, x, y));
            let ga = jt.alpha(x, y);
            m_s += fp * fp
                * ((i * jt.g2 + jt.g * (at * c)).norm_sqr() + (i * jt.g3 + jt.g * (at * sn)).norm_sqr());
            l_s += fp * fp * (jt.gs + ga * beta0).norm_sqr();
            if mu != 0.0 {
                let kfp = kf[p];
                let first = fp * fp * jt.gs * ga.conj()
                    + fp * jt.g.conj() * jt.gs * kfp
                    + fp * fp * jt.gs.conj() * ga
                    + fp * jt.g * jt.gs.conj() * kfp;
                let second = fp * fp * ga.norm_sqr()
                    + fp * jt.g.conj() * ga * kfp
                    + fp * jt.g * kfp * ga.conj()
                    + jt.g.norm_sqr() * kfp * kfp;
                i_s += (mu * first + (2.0 * beta0 * mu - mu * mu) * second).re;
            }
        }
        mag += ws * h2 * m_s;
        lon += ws * h2 * l_s;
        imu += ws * h2 * i_s;
    }
    let rhs = mag + lon - imu;
    let denom = lhs.abs() + rhs.abs();
    Ok(IdentityReport {
        lhs,
        rhs,
        discrepancy: if denom > 0.0 { (lhs - rhs).abs() / denom } else { 0.0 },
        magnetic_term: mag,
        longitudinal_term: lon,
        i_mu: imu,
        h,
        n_slices: s_nodes.len(),
    })
}
