//! Twist-rate profiles θ̇ = β₀ − μ with compactly supported slowdown μ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, integrate};

/// `exp(-1/x)` for `x > 0`, zero otherwise.
#[inline]
fn psi(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

#[inline]
fn dpsi(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp() / (x * x)
    } else {
        0.0
    }
}

/// C^∞ step: 0 for `x ≤ 0`, 1 for `x ≥ 1`.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = psi(x);
        a / (a + psi(1.0 - x))
    }
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_deriv(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let a = psi(x);
    let b = psi(1.0 - x);
    (dpsi(x) * b + a * dpsi(1.0 - x)) / ((a + b) * (a + b))
}

/// Shape of the slowdown μ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MuSpec {
    /// `amplitude·exp(−s²/width²)`, cut off smoothly between `3·width` and `4·width`.
    GaussianBump { amplitude: f64, width: f64 },
    /// `amplitude` on `|s| ≤ width`, smooth ramp to zero over `ramp`.
    SmoothPlateau { amplitude: f64, width: f64, ramp: f64 },
}

impl MuSpec {
    pub fn amplitude(&self) -> f64 {
        match *self {
            Self::GaussianBump { amplitude, .. } | Self::SmoothPlateau { amplitude, .. } => amplitude,
        }
    }

    pub fn with_amplitude(self, amp: f64) -> Self {
        match self {
            Self::GaussianBump { width, .. } => Self::GaussianBump { amplitude: amp, width },
            Self::SmoothPlateau { width, ramp, .. } => Self::SmoothPlateau {
                amplitude: amp,
                width,
                ramp,
            },
        }
    }

    /// Support half-width.
    pub fn support(&self) -> f64 {
        match *self {
            Self::GaussianBump { width, .. } => 4.0 * width,
            Self::SmoothPlateau { width, ramp, .. } => width + ramp,
        }
    }

    fn eval(&self, s: f64) -> (f64, f64) {
        match *self {
            Self::GaussianBump { amplitude, width } => {
                let r = s.abs();
                if r >= 4.0 * width {
                    return (0.0, 0.0);
                }
                let g = (-(s * s) / (width * width)).exp();
                let dg = -2.0 * s / (width * width) * g;
                let x = (4.0 * width - r) / width;
                let chi = smooth_step(x);
                let dchi = -s.signum() * smooth_step_deriv(x) / width;
                (amplitude * g * chi, amplitude * (dg * chi + g * dchi))
            }
            Self::SmoothPlateau {
                amplitude,
                width,
                ramp,
            } => {
                let x = (width + ramp - s.abs()) / ramp;
                (
                    amplitude * smooth_step(x),
                    -s.signum() * amplitude * smooth_step_deriv(x) / ramp,
                )
            }
        }
    }
}

/// θ(s) with θ̇ = β₀ − μ and θ(−s₀) = 0 (plus an optional constant shift).
#[derive(Clone, Debug)]
pub struct TwistProfile {
    beta0: f64,
    mu: MuSpec,
    s0: f64,
    theta_shift: f64,
    /// Cumulative ∫_{−s₀}^{x_k} μ at panel edges `x_k`.
    panel_edges: Vec<f64>,
    cumulative: Vec<f64>,
    mu_inf: f64,
    mu_dot_inf: f64,
}

const PANELS: usize = 2000;
const ORDER: usize = 8;

impl TwistProfile {
    pub fn new(beta0: f64, mu: MuSpec) -> Result<Self> {
        if !(beta0.is_finite() && beta0 >= 0.0) {
            return Err(Error::InvalidProfile(format!("beta0 must be >= 0, got {beta0}")));
        }
        let amp = mu.amplitude();
        if !(amp.is_finite() && amp >= 0.0) {
            return Err(Error::InvalidProfile(format!("amplitude must be >= 0, got {amp}")));
        }
        if amp > beta0 {
            return Err(Error::InvalidProfile(format!(
                "amplitude {amp} exceeds beta0 {beta0}; the twist rate would change sign"
            )));
        }
        let (width_ok, ramp_ok) = match mu {
            MuSpec::GaussianBump { width, .. } => (width > 0.0, true),
            MuSpec::SmoothPlateau { width, ramp, .. } => (width > 0.0, ramp > 0.0),
        };
        if !(width_ok && ramp_ok) {
            return Err(Error::InvalidProfile("width and ramp must be positive".into()));
        }
        let s0 = mu.support();
        let (x, w) = gauss_legendre(ORDER);
        let dx = 2.0 * s0 / PANELS as f64;
        let mut panel_edges = Vec::with_capacity(PANELS + 1);
        let mut cumulative = Vec::with_capacity(PANELS + 1);
        let mut acc = 0.0;
        for k in 0..=PANELS {
            let lo = -s0 + k as f64 * dx;
            panel_edges.push(lo);
            cumulative.push(acc);
            if k < PANELS {
                let mid = lo + 0.5 * dx;
                acc += x
                    .iter()
                    .zip(&w)
                    .map(|(xi, wi)| wi * 0.5 * dx * mu.eval(mid + 0.5 * dx * xi).0)
                    .sum::<f64>();
            }
        }
        let n = 10_000;
        let (mut mu_inf, mut mu_dot_inf) = (0.0f64, 0.0f64);
        for i in 0..=n {
            let s = -s0 + 2.0 * s0 * i as f64 / n as f64;
            let (m, dm) = mu.eval(s);
            mu_inf = mu_inf.max(m.abs());
            mu_dot_inf = mu_dot_inf.max(dm.abs());
        }
        Ok(Self {
            beta0,
            mu,
            s0,
            theta_shift: 0.0,
            panel_edges,
            cumulative,
            mu_inf,
            mu_dot_inf,
        })
    }

    /// Unperturbed twist with the given support radius for θ's reference point.
    pub fn periodic(beta0: f64) -> Self {
        Self::new(
            beta0,
            MuSpec::GaussianBump {
                amplitude: 0.0,
                width: 0.5,
            },
        )
        .expect("zero amplitude is always admissible")
    }

    /// Same profile with θ shifted by a constant.
    pub fn with_theta_shift(mut self, shift: f64) -> Self {
        self.theta_shift = shift;
        self
    }

    #[inline]
    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    pub fn mu_spec(&self) -> MuSpec {
        self.mu
    }

    #[inline]
    pub fn s0(&self) -> f64 {
        self.s0
    }

    #[inline]
    pub fn mu(&self, s: f64) -> f64 {
        self.mu.eval(s).0
    }

    #[inline]
    pub fn mu_dot(&self, s: f64) -> f64 {
        self.mu.eval(s).1
    }

    /// θ̇(s) = β₀ − μ(s).
    #[inline]
    pub fn theta_dot(&self, s: f64) -> f64 {
        self.beta0 - self.mu(s)
    }

    /// ∫_{−s₀}^{s} μ.
    fn mu_integral(&self, s: f64) -> f64 {
        if s <= -self.s0 {
            return 0.0;
        }
        if s >= self.s0 {
            return *self.cumulative.last().unwrap();
        }
        let dx = 2.0 * self.s0 / PANELS as f64;
        let k = (((s + self.s0) / dx).floor() as usize).min(PANELS - 1);
        let lo = self.panel_edges[k];
        let partial = if s > lo {
            integrate(|x| self.mu(x), lo, s, 1, ORDER)
        } else {
            0.0
        };
        self.cumulative[k] + partial
    }

    pub fn theta(&self, s: f64) -> f64 {
        self.beta0 * (s + self.s0) - self.mu_integral(s) + self.theta_shift
    }

    pub fn mu_inf(&self) -> f64 {
        self.mu_inf
    }

    pub fn mu_dot_inf(&self) -> f64 {
        self.mu_dot_inf
    }

    /// ∫ (θ̇² − β₀²) ds = ∫ (μ² − 2β₀μ) ds.
    pub fn ass_integral(&self) -> f64 {
        integrate(
            |s| {
                let m = self.mu(s);
                m * m - 2.0 * self.beta0 * m
            },
            -self.s0,
            self.s0,
            400,
            ORDER,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_step_limits() {
        assert_eq!(smooth_step(-1.0), 0.0);
        assert_eq!(smooth_step(2.0), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        let h = 1e-6;
        let fd = (smooth_step(0.3 + h) - smooth_step(0.3 - h)) / (2.0 * h);
        assert!((fd - smooth_step_deriv(0.3)).abs() < 1e-6);
    }

    #[test]
    fn derivative_of_mu_matches_finite_difference() {
        let tp = TwistProfile::new(
            1.0,
            MuSpec::GaussianBump {
                amplitude: 0.5,
                width: 0.5,
            },
        )
        .unwrap();
        let h = 1e-6;
        for &s in &[-1.7, -0.4, 0.0, 0.3, 1.6] {
            let fd = (tp.mu(s + h) - tp.mu(s - h)) / (2.0 * h);
            assert!((fd - tp.mu_dot(s)).abs() < 1e-6, "s={s}");
        }
    }

    #[test]
    fn rejects_sign_changing_twist() {
        let r = TwistProfile::new(
            0.2,
            MuSpec::GaussianBump {
                amplitude: 0.3,
                width: 0.5,
            },
        );
        assert!(r.is_err());
    }
}
