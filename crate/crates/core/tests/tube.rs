use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twistspec::cross_section::threshold_e;
use twistspec::geometry::{CrossSection, ShapeSpec};
use twistspec::tube::*;

fn ellipse(h: f64) -> CrossSection {
    CrossSection::build(ShapeSpec::ellipse(1.0, 0.6), h).unwrap()
}

fn gaussian(amplitude: f64, width: f64) -> MuSpec {
    MuSpec::GaussianBump { amplitude, width }
}

fn coarse_opts() -> ProbeOptions {
    ProbeOptions {
        ds: 0.25,
        ..ProbeOptions::default()
    }
}

#[test]
fn unperturbed_profile_is_linear() {
    let t = TwistProfile::new(0.8, gaussian(0.0, 0.5)).unwrap();
    for s in [-2.0, -0.3, 0.0, 1.1, 2.0] {
        assert!((t.theta(s) - 0.8 * (s + t.s0())).abs() < 1e-12);
        assert_eq!(t.mu(s), 0.0);
    }
    assert_eq!(t.ass_integral(), 0.0);
}

#[test]
fn sharp_plateau_integral_tends_to_minus_two_beta_squared() {
    let b = 0.7;
    let mut errs = Vec::new();
    for ramp in [0.1, 0.01, 0.001] {
        let t = TwistProfile::new(
            b,
            MuSpec::SmoothPlateau {
                amplitude: b,
                width: 1.0,
                ramp,
            },
        )
        .unwrap();
        errs.push((t.ass_integral() + 2.0 * b * b).abs());
    }
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[2] < 2e-3);
}

#[test]
fn half_speed_bump_has_negative_integral() {
    let t = TwistProfile::new(1.0, gaussian(0.5, 0.5)).unwrap();
    let ass = t.ass_integral();
    // Independent quadrature of μ² − 2β₀μ by the midpoint rule.
    let n = 200_000;
    let (a, b) = (-t.s0(), t.s0());
    let dx = (b - a) / n as f64;
    let direct: f64 = (0..n)
        .map(|i| {
            let m = t.mu(a + (i as f64 + 0.5) * dx);
            m * m - 2.0 * m
        })
        .sum::<f64>()
        * dx;
    assert!(ass < 0.0);
    assert!((ass - direct).abs() < 1e-8);
}

#[test]
fn excessive_slowdown_is_rejected() {
    assert!(TwistProfile::new(0.2, gaussian(0.21, 1.0)).is_err());
    assert!(TwistProfile::new(0.2, gaussian(0.1, 0.0)).is_err());
    assert!(TwistProfile::new(-1.0, gaussian(0.0, 1.0)).is_err());
}

#[test]
fn zero_twist_leaves_potential_unrotated() {
    let pot = MagneticPotential::from_spec(PotentialSpec::default());
    let t = TwistProfile::periodic(0.0);
    for &(s, x, y) in &[(0.1, 0.2, -0.1), (-0.3, 0.05, 0.3), (0.0, 0.0, 0.0)] {
        assert_eq!(pot.a_tilde(&t, s, x, y), pot.value(s, x, y));
    }
}

#[test]
fn radial_potential_is_rotation_invariant() {
    let pot = MagneticPotential::custom(
        |s: f64, x: f64, y: f64| {
            let r2 = x * x + y * y;
            (-r2 / 0.1).exp() * (1.0 - (s / 0.9).powi(2)).max(0.0).powi(3)
        },
        [0.9, 1.0, 1.0],
        0.3,
    );
    let a = TwistProfile::new(1.0, gaussian(0.4, 0.2)).unwrap();
    let b = TwistProfile::periodic(0.0);
    for &(s, x, y) in &[(0.1, 0.2, -0.1), (-0.5, 0.4, 0.3)] {
        assert!((pot.a_tilde(&a, s, x, y) - pot.a_tilde(&b, s, x, y)).abs() < 1e-14);
    }
}

#[test]
fn twisted_frame_matches_direct_rotation() {
    let pot = MagneticPotential::from_spec(PotentialSpec::Gaussian {
        amplitude: 1.3,
        width: 0.4,
    });
    let twist = TwistProfile::new(1.2, gaussian(0.6, 0.3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let s: f64 = rng.gen_range(-1.2..1.2);
        let t2: f64 = rng.gen_range(-0.8..0.8);
        let t3: f64 = rng.gen_range(-0.6..0.6);
        // θ by direct quadrature of θ̇ from −s₀.
        let s0 = twist.s0();
        let n = 20_000;
        let dx = (s + s0) / n as f64;
        let theta: f64 = (0..n)
            .map(|i| twist.theta_dot(-s0 + (i as f64 + 0.5) * dx))
            .sum::<f64>()
            * dx;
        let (sn, c) = theta.sin_cos();
        let direct = pot.value(s, t2 * c + t3 * sn, t3 * c - t2 * sn);
        assert!((pot.a_tilde(&twist, s, t2, t3) - direct).abs() < 1e-8);
    }
}

#[test]
fn sup_norm_is_rotation_invariant() {
    let cs = CrossSection::build(ShapeSpec::ellipse(1.0, 1.0), 1.0 / 48.0).unwrap();
    let pot = MagneticPotential::from_spec(PotentialSpec::default());
    let a = pot.a_inf(&cs, &TwistProfile::new(1.0, gaussian(0.3, 0.1)).unwrap(), 64);
    let b = pot.a_inf(&cs, &TwistProfile::periodic(0.0), 64);
    assert!((a / b - 1.0).abs() < 0.02, "{a} vs {b}");
}

#[test]
fn default_potential_support_and_field() {
    let pot = MagneticPotential::from_spec(PotentialSpec::default());
    let ext = pot.support_box();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        // Points on the shell just outside the support ball.
        let (u, v): (f64, f64) = (rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI));
        let r = ext[0] * 1.0001;
        assert_eq!(pot.value(r * u.cos(), r * u.sin() * v.cos(), r * u.sin() * v.sin()), 0.0);
    }
    assert!(pot.slice_field(0.0, 0.0, 0.0, 0.0).abs() > 0.5);
    assert!(pot.s_independence_violation(0.1).is_finite());
}

#[test]
fn periodic_twist_has_no_bound_state() {
    let cs = ellipse(1.0 / 12.0);
    let twist = TwistProfile::periodic(1.0);
    let r = discrete_spectrum_probe(&cs, &twist, None, &[4.0, 8.0, 16.0], &coarse_opts()).unwrap();
    assert_eq!(r.verdict, Verdict::NoBoundState, "{:?}", r.lambda1());
    assert!(r.monotone);
    assert!(r.below_e.iter().all(|v| v.is_empty()));
    let gaps: Vec<f64> = r.lambda1().iter().map(|l| l - r.e).collect();
    for w in gaps.windows(2) {
        assert!(w[1] <= 0.6 * w[0], "{gaps:?}");
    }
    assert_eq!(r.ass_integral, 0.0);
}

#[test]
fn slowdown_binds_a_state() {
    let cs = ellipse(1.0 / 12.0);
    let twist = TwistProfile::new(1.0, gaussian(0.5, 1.5)).unwrap();
    let r = discrete_spectrum_probe(&cs, &twist, None, &[7.0, 8.0, 10.0], &coarse_opts()).unwrap();
    assert_eq!(r.verdict, Verdict::BoundState, "{:?} vs E = {}", r.lambda1(), r.e);
    assert!(r.has_stable_bound_state());
    assert!(r.ass_integral < 0.0);
    assert!(!r.below_e[0].is_empty());
    let json = serde_json::to_value(&r).unwrap();
    for key in ["E", "beta0", "scenario", "L_values", "eigenvalues", "below_E", "verdict", "ass_integral"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert_eq!(json["verdict"], "bound_state");
}

#[test]
fn probe_rejects_bad_truncations() {
    let cs = ellipse(1.0 / 10.0);
    let twist = TwistProfile::new(1.0, gaussian(0.5, 1.5)).unwrap();
    let o = coarse_opts();
    assert!(discrete_spectrum_probe(&cs, &twist, None, &[8.0, 16.0], &o).is_err());
    assert!(discrete_spectrum_probe(&cs, &twist, None, &[8.0, 16.0, 12.0], &o).is_err());
    assert!(discrete_spectrum_probe(&cs, &twist, None, &[5.0, 8.0, 16.0], &o).is_err());
}

#[test]
fn constant_angle_shift_leaves_spectrum_unchanged() {
    // Half turns map the centred ellipse grid onto itself, so a θ offset of π is an
    // exact symmetry of the discrete problem even with a field.
    let cs = ellipse(1.0 / 10.0);
    let pot = MagneticPotential::from_spec(PotentialSpec::default());
    let twist = TwistProfile::new(0.6, gaussian(0.2, 0.2)).unwrap();
    let opts = ProbeOptions::default();
    let setup = ProbeSetup::new(&cs, 0.6, opts.n_modes, opts.tol).unwrap();
    let a = tube_eigenvalues(&cs, &twist, Some(&pot), &setup, 2.0, 4, &opts).unwrap();
    let shifted = twist.clone().with_theta_shift(PI);
    let b = tube_eigenvalues(&cs, &shifted, Some(&pot), &setup, 2.0, 4, &opts).unwrap();
    for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
        assert!((x - y).abs() < 10.0 * opts.tol * x, "{x} vs {y}");
    }
    // Without a field θ enters only through θ̇.
    let c = tube_eigenvalues(&cs, &twist, None, &setup, 2.0, 4, &opts).unwrap();
    let d = tube_eigenvalues(&cs, &twist.with_theta_shift(0.37), None, &setup, 2.0, 4, &opts).unwrap();
    assert_eq!(c.eigenvalues, d.eigenvalues);
}

#[test]
fn field_is_diamagnetic_and_truncation_monotone() {
    let cs = ellipse(1.0 / 10.0);
    let h = cs.h();
    let pot = MagneticPotential::from_spec(PotentialSpec::Gaussian {
        amplitude: 2.0,
        width: 0.3,
    });
    let opts = ProbeOptions::default();
    for (b, amp) in [(0.2, 0.1), (1.0, 0.5)] {
        let twist = TwistProfile::new(b, gaussian(amp, 0.3)).unwrap();
        let on = discrete_spectrum_probe(&cs, &twist, Some(&pot), &[1.5, 3.0, 6.0], &opts).unwrap();
        let off = discrete_spectrum_probe(&cs, &twist, None, &[1.5, 3.0, 6.0], &opts).unwrap();
        assert!(on.monotone && off.monotone);
        for (x, y) in on.lambda1().iter().zip(off.lambda1()) {
            assert!(*x >= y - 10.0 * h * h, "beta0 {b}: {x} vs {y}");
        }
        assert!(on.field_s_variation.is_some());
    }
}

#[test]
fn window_counts_cover_the_requested_band() {
    let cs = ellipse(1.0 / 10.0);
    let twist = TwistProfile::periodic(1.0);
    let opts = coarse_opts();
    let setup = ProbeSetup::new(&cs, 1.0, opts.n_modes, opts.tol).unwrap();
    let w = spectrum_window(&cs, &twist, None, &setup, 4.0, 1.0, &opts).unwrap();
    assert!(!w.is_empty());
    assert!(w.iter().all(|&v| v >= setup.e - 1e-6 && v <= setup.e + 1.0));
    // Longitudinal modes of the straightened periodic tube fill the window like
    // E + (nπ/2L)², so the count is close to 2L/π.
    let expected = (2.0 * 4.0 / PI).floor() as usize;
    assert!(w.len() >= expected.saturating_sub(1), "{} values", w.len());
}

fn identity(h: f64, twist: &TwistProfile, pot: Option<&MagneticPotential>, g: &TestFunction) -> IdentityReport {
    let cs = ellipse(h);
    let td = threshold_e(&cs, twist.beta0(), 1e-11).unwrap();
    form_identity_check(&cs, twist, pot, &td, g).unwrap()
}

#[test]
fn identity_without_perturbation() {
    let twist = TwistProfile::periodic(1.0);
    let g = TestFunction::Centered {
        s_width: 1.5,
        radius: 0.7,
        phase: 0.0,
    };
    let r = identity(1.0 / 64.0, &twist, None, &g);
    assert_eq!(r.i_mu, 0.0);
    assert!(r.magnetic_term >= 0.0 && r.longitudinal_term >= 0.0);
    assert!(r.discrepancy <= 1e-2, "{r:?}");
}

#[test]
fn identity_with_slowdown_and_field_converges() {
    let twist = TwistProfile::new(1.0, gaussian(0.5, 0.3)).unwrap();
    let pot = MagneticPotential::from_spec(PotentialSpec::default());
    let g = TestFunction::Centered {
        s_width: 1.5,
        radius: 0.7,
        phase: 2.0,
    };
    let coarse = identity(1.0 / 32.0, &twist, Some(&pot), &g);
    let fine = identity(1.0 / 64.0, &twist, Some(&pot), &g);
    assert!(fine.i_mu != 0.0);
    assert!(fine.discrepancy <= 1e-2, "{fine:?}");
    assert!(coarse.discrepancy / fine.discrepancy >= 3.0, "{} -> {}", coarse.discrepancy, fine.discrepancy);
}

#[test]
fn identity_rejects_functions_touching_the_boundary() {
    let cs = ellipse(1.0 / 16.0);
    let td = threshold_e(&cs, 1.0, 1e-10).unwrap();
    let g = TestFunction::Centered {
        s_width: 1.0,
        radius: 1.2,
        phase: 0.0,
    };
    let err = form_identity_check(&cs, &TwistProfile::periodic(1.0), None, &td, &g).unwrap_err();
    assert!(matches!(err, twistspec::Error::NotCompactlySupported { .. }));
    let wrong = threshold_e(&cs, 0.5, 1e-10).unwrap();
    let ok = TestFunction::Centered {
        s_width: 1.0,
        radius: 0.5,
        phase: 0.0,
    };
    assert!(form_identity_check(&cs, &TwistProfile::periodic(1.0), None, &wrong, &ok).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn profile_samplers_are_consistent(beta in 0.05f64..2.0, frac in 0.0f64..1.0, width in 0.1f64..2.0, s in -1.0f64..1.0) {
        let t = TwistProfile::new(beta, gaussian(frac * beta, width)).unwrap();
        let x = s * t.s0();
        prop_assert!((t.theta_dot(x) - (beta - t.mu(x))).abs() < 1e-15);
        prop_assert!(t.mu(x) >= 0.0 && t.mu(x) <= beta);
        let step = 1e-4;
        let fd = (t.theta(x + step) - t.theta(x - step)) / (2.0 * step);
        prop_assert!((fd - t.theta_dot(x)).abs() < 1e-6);
        prop_assert_eq!(t.mu(1.0001 * t.s0()), 0.0);
        if frac > 1e-6 {
            prop_assert!(t.ass_integral() < 0.0);
        }
    }

    #[test]
    fn plateau_profiles_are_consistent(beta in 0.05f64..2.0, frac in 0.01f64..1.0, width in 0.1f64..2.0, ramp in 0.05f64..1.0) {
        let t = TwistProfile::new(beta, MuSpec::SmoothPlateau { amplitude: frac * beta, width, ramp }).unwrap();
        prop_assert!(t.ass_integral() < 0.0);
        prop_assert!((t.mu_inf() - frac * beta).abs() < 1e-12);
        prop_assert!(t.theta(t.s0()) < beta * 2.0 * t.s0());
    }
}
