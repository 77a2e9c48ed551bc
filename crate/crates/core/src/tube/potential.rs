//! Compactly supported vector potentials 𝒜 = (0, A, 0) and their twisted-frame samples.
//!
//! Arguments of `A` are lab coordinates `(s, x, y)` with `s` along the tube axis.
//! For every slice the 2D potential `(Ã cosθ, Ã sinθ)` has magnetic field `−∂_y A`
//! evaluated at the rotated point.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::profile::{smooth_step, smooth_step_deriv, TwistProfile};
use crate::geometry::CrossSection;

/// Serializable potential families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    /// `a·y·exp(−(s²+x²+y²)/w²)` cut off smoothly between radius `2w` and `3w`;
    /// its slice field is nonzero at the origin.
    Gaussian { amplitude: f64, width: f64 },
    /// `a·x·exp(−(s²+x²+y²)/w²)` with the same cutoff; slice field vanishes on the axes.
    GaussianSheared { amplitude: f64, width: f64 },
}

impl PotentialSpec {
    pub fn amplitude(&self) -> f64 {
        match *self {
            Self::Gaussian { amplitude, .. } | Self::GaussianSheared { amplitude, .. } => amplitude,
        }
    }

    pub fn with_amplitude(self, amplitude: f64) -> Self {
        match self {
            Self::Gaussian { width, .. } => Self::Gaussian { amplitude, width },
            Self::GaussianSheared { width, .. } => Self::GaussianSheared { amplitude, width },
        }
    }

    pub fn width(&self) -> f64 {
        match *self {
            Self::Gaussian { width, .. } | Self::GaussianSheared { width, .. } => width,
        }
    }
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self::Gaussian {
            amplitude: 1.0,
            width: 0.3,
        }
    }
}

type ScalarField = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Spec(PotentialSpec),
    Custom(ScalarField),
}

/// The scalar `A` together with its support box.
#[derive(Clone)]
pub struct MagneticPotential {
    kind: Kind,
    /// Half-extents of the support box in `(s, x, y)`.
    support: [f64; 3],
    ball_radius: f64,
}

impl fmt::Debug for MagneticPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("MagneticPotential");
        match &self.kind {
            Kind::Spec(s) => d.field("spec", s),
            Kind::Custom(_) => d.field("spec", &"custom"),
        };
        d.field("support", &self.support)
            .field("ball_radius", &self.ball_radius)
            .finish()
    }
}

impl MagneticPotential {
    pub fn from_spec(spec: PotentialSpec) -> Self {
        let w = spec.width();
        Self {
            kind: Kind::Spec(spec),
            support: [3.0 * w; 3],
            ball_radius: w,
        }
    }

    /// Arbitrary `A(s, x, y)` vanishing outside the box with the given half-extents.
    pub fn custom(
        a: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        support: [f64; 3],
        ball_radius: f64,
    ) -> Self {
        Self {
            kind: Kind::Custom(Arc::new(a)),
            support,
            ball_radius,
        }
    }

    pub fn spec(&self) -> Option<PotentialSpec> {
        match self.kind {
            Kind::Spec(s) => Some(s),
            Kind::Custom(_) => None,
        }
    }

    pub fn support_box(&self) -> [f64; 3] {
        self.support
    }

    /// Half-extent of the support along the tube axis.
    pub fn s_extent(&self) -> f64 {
        self.support[0]
    }

    pub fn ball_radius(&self) -> f64 {
        self.ball_radius
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, Kind::Spec(s) if s.amplitude() == 0.0)
    }

    /// `A(s, x, y)` and `∂_y A(s, x, y)`.
    pub fn value_and_dy(&self, s: f64, x: f64, y: f64) -> (f64, f64) {
        match &self.kind {
            Kind::Spec(spec) => {
                let w = spec.width();
                let a = spec.amplitude();
                let r2 = s * s + x * x + y * y;
                let r = r2.sqrt();
                if r >= 3.0 * w || a == 0.0 {
                    return (0.0, 0.0);
                }
                let g = (-r2 / (w * w)).exp();
                let dg_dy = -2.0 * y / (w * w) * g;
                let u = (3.0 * w - r) / w;
                let chi = smooth_step(u);
                let dchi_dy = if r > 0.0 {
                    -smooth_step_deriv(u) / w * y / r
                } else {
                    0.0
                };
                match spec {
                    PotentialSpec::Gaussian { .. } => (
                        a * y * g * chi,
                        a * (g * chi + y * dg_dy * chi + y * g * dchi_dy),
                    ),
                    PotentialSpec::GaussianSheared { .. } => {
                        (a * x * g * chi, a * x * (dg_dy * chi + g * dchi_dy))
                    }
                }
            }
            Kind::Custom(f) => {
                let eps = 1e-5;
                (
                    f(s, x, y),
                    (f(s, x, y + eps) - f(s, x, y - eps)) / (2.0 * eps),
                )
            }
        }
    }

    #[inline]
    pub fn value(&self, s: f64, x: f64, y: f64) -> f64 {
        match &self.kind {
            Kind::Custom(f) => f(s, x, y),
            Kind::Spec(_) => self.value_and_dy(s, x, y).0,
        }
    }

    /// Ã(s, t) = A(s, t₂cosθ + t₃sinθ, t₃cosθ − t₂sinθ).
    pub fn a_tilde(&self, twist: &TwistProfile, s: f64, t2: f64, t3: f64) -> f64 {
        let th = twist.theta(s);
        let (sn, cs) = th.sin_cos();
        self.value(s, t2 * cs + t3 * sn, t3 * cs - t2 * sn)
    }

    /// Slice vector potential `(Ã cosθ, Ã sinθ)` at the point `(t₂, t₃)` of slice `s`,
    /// given `θ(s)`.
    #[inline]
    pub fn slice_potential(&self, s: f64, theta: f64, t2: f64, t3: f64) -> [f64; 2] {
        let (sn, cs) = theta.sin_cos();
        let a = self.value(s, t2 * cs + t3 * sn, t3 * cs - t2 * sn);
        [a * cs, a * sn]
    }

    /// Magnetic field of the slice potential, `−∂_y A` at the rotated point.
    pub fn slice_field(&self, s: f64, theta: f64, t2: f64, t3: f64) -> f64 {
        let (sn, cs) = theta.sin_cos();
        -self.value_and_dy(s, t2 * cs + t3 * sn, t3 * cs - t2 * sn).1
    }

    /// ‖Ã‖∞ sampled over the cross-section grid at `n_s` slices across the s-support.
    pub fn a_inf(&self, cs: &CrossSection, twist: &TwistProfile, n_s: usize) -> f64 {
        let ext = self.s_extent();
        let mut best = 0.0f64;
        for k in 0..n_s {
            let s = -ext + 2.0 * ext * (k as f64 + 0.5) / n_s as f64;
            let th = twist.theta(s);
            let (sn, c) = th.sin_cos();
            for &(t2, t3) in cs.coords() {
                best = best.max(self.value(s, t2 * c + t3 * sn, t3 * c - t2 * sn).abs());
            }
        }
        best
    }

    /// Relative variation of `−∂_y A` over the centered ball as the slice moves through
    /// `(−s₀, s₀)`, measured against the slice at `s = 0`.
    pub fn s_independence_violation(&self, s0: f64) -> f64 {
        let r = self.ball_radius;
        let mut pts = Vec::new();
        for i in 0..8 {
            for k in 0..16 {
                let rho = r * (i as f64 + 0.5) / 8.0;
                let phi = std::f64::consts::TAU * k as f64 / 16.0;
                pts.push((rho * phi.cos(), rho * phi.sin()));
            }
        }
        let reference: Vec<f64> = pts.iter().map(|&(x, y)| self.value_and_dy(0.0, x, y).1).collect();
        let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for j in 0..17 {
            let s = -s0 + 2.0 * s0 * (j as f64 + 1.0) / 18.0;
            for (p, &(x, y)) in pts.iter().enumerate() {
                let v = self.value_and_dy(s, x, y).1;
                worst = worst.max((v - reference[p]).abs());
            }
        }
        worst / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_derivative_matches_finite_difference() {
        for spec in [
            PotentialSpec::Gaussian {
                amplitude: 1.3,
                width: 0.3,
            },
            PotentialSpec::GaussianSheared {
                amplitude: 0.7,
                width: 0.3,
            },
        ] {
            let pot = MagneticPotential::from_spec(spec);
            let e = 1e-6;
            for &(s, x, y) in &[(0.1, 0.2, -0.1), (0.0, 0.0, 0.0), (0.3, -0.4, 0.5)] {
                let fd = (pot.value(s, x, y + e) - pot.value(s, x, y - e)) / (2.0 * e);
                assert!((fd - pot.value_and_dy(s, x, y).1).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn vanishes_outside_support() {
        let pot = MagneticPotential::from_spec(PotentialSpec::default());
        assert_eq!(pot.value(0.0, 0.0, 0.9), 0.0);
        assert_eq!(pot.value(0.95, 0.0, 0.0), 0.0);
        assert!(pot.value_and_dy(0.0, 0.0, 0.0).1 > 0.0);
    }
}
