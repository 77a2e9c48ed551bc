//! Twisted tube scenarios: twist profiles, vector potentials, spectral probes and the
//! ground-state factorization identity.

mod identity;
mod potential;
mod probe;
mod profile;

pub use identity::{form_identity_check, IdentityReport, TestFunction};
pub use potential::{MagneticPotential, PotentialSpec};
pub use probe::{
    discrete_spectrum_probe, probe_with_setup, spectrum_window, tube_eigenvalues, verdict_from,
    LevelResult, ProbeOptions, ProbeReport, ProbeSetup, Verdict, SHRINK_PER_DOUBLING,
    STABLE_REL_CHANGE,
};
pub use profile::{smooth_step, smooth_step_deriv, MuSpec, TwistProfile};
