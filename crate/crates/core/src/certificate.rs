//! Explicit sufficient condition for `Q[u] − E‖u‖² ≥ 0` and a grid search over its
//! free parameters `(c, ε, δ)`.
//!
//! The condition splits into two cases according to how much of `f²|g|²` sits in the
//! eroded region `ω_δ = {τ ≥ δ}`. Both slacks must be nonnegative for one shared
//! triple since the two cases are exhaustive.

use std::fmt::Write as _;

use serde::Serialize;

use crate::cross_section::{ground_state_constants, GroundStateConstants, ThresholdData};
use crate::discretize::{assemble_magnetic_slice, SliceBoundary};
use crate::eigensolve::{lobpcg, Jacobi, SolverOptions};
use crate::error::{Error, Result};
use crate::geometry::CrossSection;
use crate::par::map_collect;
use crate::sparse::LinearOperator;
use crate::tube::{MagneticPotential, TwistProfile};

/// Relative inflation (of suprema) and deflation (of lower bounds) applied to measured
/// constants.
pub const SAFETY_FACTOR: f64 = 0.05;

/// Number of slices sampled over `(−s₀, s₀)` for `τ_A`.
pub const TAU_SLICES: usize = 17;

/// Every constant entering the two slack expressions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateInputs {
    #[serde(rename = "E")]
    pub e: f64,
    pub d: f64,
    pub mu_inf: f64,
    pub mu_dot_inf: f64,
    #[serde(rename = "A_inf")]
    pub a_inf: f64,
    pub beta0: f64,
    #[serde(rename = "tau_A")]
    pub tau_a: f64,
    pub f_inf_sq: f64,
    /// `(δ, inf_{ω_δ} f²)` for every δ of the search grid.
    #[serde(rename = "f_min_sq_on_delta")]
    pub f_min_sq: Vec<(f64, f64)>,
    pub lap_f_inf: f64,
    pub alpha0: f64,
    pub c0: f64,
    #[serde(rename = "C_lemma1")]
    pub c_lemma1: f64,
}

impl CertificateInputs {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("E", self.e),
            ("d", self.d),
            ("mu_inf", self.mu_inf),
            ("mu_dot_inf", self.mu_dot_inf),
            ("A_inf", self.a_inf),
            ("beta0", self.beta0),
            ("tau_A", self.tau_a),
            ("f_inf_sq", self.f_inf_sq),
            ("lap_f_inf", self.lap_f_inf),
            ("alpha0", self.alpha0),
            ("c0", self.c0),
            ("C_lemma1", self.c_lemma1),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::IncompleteInputs(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        for (name, v) in [("E", self.e), ("d", self.d), ("c0", self.c0), ("alpha0", self.alpha0), ("beta0", self.beta0)] {
            if v <= 0.0 {
                return Err(Error::IncompleteInputs(format!("{name} must be strictly positive")));
            }
        }
        if self.f_min_sq.is_empty() {
            return Err(Error::IncompleteInputs("empty delta grid".into()));
        }
        for &(d, v) in &self.f_min_sq {
            if !(d > 0.0 && v.is_finite() && v >= 0.0) {
                return Err(Error::IncompleteInputs(format!("bad delta entry ({d}, {v})")));
            }
        }
        Ok(())
    }

    /// Suprema inflated and lower bounds deflated by `factor`.
    pub fn with_safety(&self, factor: f64) -> Self {
        let up = 1.0 + factor;
        let down = 1.0 - factor;
        Self {
            mu_inf: self.mu_inf * up,
            mu_dot_inf: self.mu_dot_inf * up,
            a_inf: self.a_inf * up,
            f_inf_sq: self.f_inf_sq * up,
            lap_f_inf: self.lap_f_inf * up,
            tau_a: self.tau_a * down,
            f_min_sq: self.f_min_sq.iter().map(|&(d, v)| (d, v * down)).collect(),
            alpha0: self.alpha0 * down,
            c0: self.c0 * down,
            c_lemma1: self.c_lemma1 * down,
            ..self.clone()
        }
    }

    fn mu_max(&self) -> f64 {
        self.mu_inf.max(self.mu_dot_inf)
    }

    fn f_min_sq_at(&self, delta: f64) -> Result<f64> {
        self.f_min_sq
            .iter()
            .find(|(d, _)| (d - delta).abs() <= 1e-12 * delta.max(1.0))
            .map(|&(_, v)| v)
            .ok_or_else(|| Error::IncompleteInputs(format!("no f_min_sq for delta = {delta}")))
    }

    /// Largest ε with `1 − εΔf/(2c₀α₀) > 0`.
    pub fn epsilon_max(&self) -> f64 {
        if self.lap_f_inf == 0.0 {
            f64::INFINITY
        } else {
            2.0 * self.c0 * self.alpha0 / self.lap_f_inf
        }
    }
}

/// `γ¹, γ̃¹, γ², γ̄¹` at the free parameter `c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Gammas {
    pub gamma1: f64,
    pub gamma1_tilde: f64,
    pub gamma2: f64,
    pub gamma1_bar: f64,
}

pub fn gamma_constants(inp: &CertificateInputs, c: f64) -> Gammas {
    let d2 = inp.d * inp.d;
    let b = inp.beta0;
    let bracket = 1.0 / c + 2.0 * b + 0.5 + 4.0 / (b * d2);
    let gamma2 = 2.0 * d2 * bracket * inp.a_inf * inp.a_inf + 2.0 * inp.e / b + 0.5;
    let gamma1 = (0.5 - 2.0 * d2 * bracket * inp.mu_max()).max(0.5 - c * inp.mu_inf);
    let gamma1_tilde = 1.0 - 32.0 * c * d2 * b * b - 2.0 * d2 * bracket * inp.mu_max();
    Gammas {
        gamma1,
        gamma1_tilde,
        gamma2,
        gamma1_bar: gamma1.min(gamma1_tilde),
    }
}

/// Case (a): `γ̄¹τ_A inf_{ω_δ}f²/‖f‖²∞ − 2γ²max(‖μ‖∞,‖μ̇‖∞) − 64cd²β₀²‖Ã‖²∞`.
pub fn case_a_slack(inp: &CertificateInputs, c: f64, delta: f64) -> Result<f64> {
    let g = gamma_constants(inp, c);
    let fmin = inp.f_min_sq_at(delta)?;
    Ok(case_a_with(inp, &g, c, fmin))
}

fn case_a_with(inp: &CertificateInputs, g: &Gammas, c: f64, fmin: f64) -> f64 {
    let ratio = if inp.f_inf_sq > 0.0 { fmin / inp.f_inf_sq } else { 0.0 };
    g.gamma1_bar * inp.tau_a * ratio
        - 2.0 * g.gamma2 * inp.mu_max()
        - 64.0 * c * inp.d * inp.d * inp.beta0 * inp.beta0 * inp.a_inf * inp.a_inf
}

/// Coefficients `(P, Q)` of the case (b) slack `P/δ² − Q`.
fn case_b_coefficients(inp: &CertificateInputs, g: &Gammas, c: f64, eps: f64) -> (f64, f64) {
    let a2 = inp.a_inf * inp.a_inf;
    let p = g.gamma1_bar * inp.c_lemma1 / 2.0
        * (1.0 - eps * inp.lap_f_inf / (2.0 * inp.c0 * inp.alpha0));
    let q = g.gamma1_bar * inp.lap_f_inf / (4.0 * eps * inp.alpha0)
        + g.gamma1_bar * a2
        + g.gamma2 * inp.mu_max()
        + 32.0 * c * inp.d * inp.d * inp.beta0 * inp.beta0 * a2;
    (p, q)
}

fn check_epsilon(inp: &CertificateInputs, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < inp.epsilon_max()) {
        return Err(Error::InvalidArgument(format!(
            "epsilon = {eps} outside (0, {}) where 1 - eps*lap_f/(2 c0 alpha0) > 0",
            inp.epsilon_max()
        )));
    }
    Ok(())
}

/// Case (b): `γ̄¹C/(2δ²)(1 − εΔf/(2c₀α₀)) − γ̄¹Δf/(4εα₀) − γ̄¹‖Ã‖²∞
/// − γ²max(‖μ‖∞,‖μ̇‖∞) − 32cd²β₀²‖Ã‖²∞`.
pub fn case_b_slack(inp: &CertificateInputs, c: f64, eps: f64, delta: f64) -> Result<f64> {
    check_epsilon(inp, eps)?;
    let g = gamma_constants(inp, c);
    let (p, q) = case_b_coefficients(inp, &g, c, eps);
    Ok(p / (delta * delta) - q)
}

/// Root `δ*` of the case (b) slack in δ: the slack is nonnegative exactly for
/// `δ ≤ δ*`. `None` when it is never nonnegative, infinite when always.
pub fn case_b_delta_star(inp: &CertificateInputs, c: f64, eps: f64) -> Result<Option<f64>> {
    check_epsilon(inp, eps)?;
    let g = gamma_constants(inp, c);
    let (p, q) = case_b_coefficients(inp, &g, c, eps);
    Ok(if q <= 0.0 && p >= 0.0 {
        Some(f64::INFINITY)
    } else if p <= 0.0 {
        None
    } else {
        Some((p / q).sqrt())
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateVerdict {
    Certified,
    Failed,
}

impl CertificateVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Certified => "certified",
            Self::Failed => "failed",
        }
    }
}

/// Counts collected during the grid search.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SearchTrace {
    pub evaluated: usize,
    pub gamma1_bar_positive: usize,
    pub case_a_nonnegative: usize,
    pub case_b_nonnegative: usize,
    pub both_nonnegative: usize,
    /// Best `min(slack_a, slack_b)` per δ.
    pub best_per_delta: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    pub c: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub gamma1: f64,
    pub gamma1_tilde: f64,
    pub gamma1_bar: f64,
    pub gamma2: f64,
    pub slack_case_a: f64,
    pub slack_case_b: f64,
    /// Closed-form δ bound of case (b) at the chosen `(c, ε)`.
    pub delta_star: Option<f64>,
    pub verdict: CertificateVerdict,
    pub safety_factor: f64,
    /// Inputs after the safety factor, as used by the search.
    pub inputs: CertificateInputs,
    pub trace: SearchTrace,
    pub warnings: Vec<String>,
}

/// The `c` grid: 41 points log-spaced on `[10⁻⁴, 10]`.
pub fn c_grid() -> Vec<f64> {
    (0..41)
        .map(|i| 10f64.powf(-4.0 + 5.0 * i as f64 / 40.0))
        .collect()
}

/// The ε grid: 17 interior points of `(0, ε_max)`.
pub fn epsilon_grid(inp: &CertificateInputs) -> Vec<f64> {
    let emax = inp.epsilon_max();
    let emax = if emax.is_finite() { emax } else { 1e6 };
    (1..=17).map(|i| emax * i as f64 / 18.0).collect()
}

struct Candidate {
    score: f64,
    c: f64,
    eps: f64,
    delta: f64,
    g: Gammas,
    a: f64,
    b: f64,
}

/// Grid search over `(c, ε, δ)` on inputs that already include any safety factor.
pub fn certify_raw(inp: &CertificateInputs) -> Result<CertificateReport> {
    inp.validate()?;
    let cs = c_grid();
    let eps = epsilon_grid(inp);
    let deltas: Vec<(f64, f64)> = inp.f_min_sq.clone();
    // One task per c value; the reduction below scans results in grid order.
    let per_c = map_collect(cs, |c| {
        let g = gamma_constants(inp, c);
        let mut out = Vec::with_capacity(eps.len() * deltas.len());
        for &e in &eps {
            let (p, q) = case_b_coefficients(inp, &g, c, e);
            for &(d, fmin) in &deltas {
                let a = case_a_with(inp, &g, c, fmin);
                let b = p / (d * d) - q;
                out.push(Candidate {
                    score: a.min(b),
                    c,
                    eps: e,
                    delta: d,
                    g,
                    a,
                    b,
                });
            }
        }
        out
    });
    let mut trace = SearchTrace {
        best_per_delta: deltas.iter().map(|&(d, _)| (d, f64::NEG_INFINITY)).collect(),
        ..Default::default()
    };
    let mut best: Option<Candidate> = None;
    let mut best_feasible: Option<Candidate> = None;
    for cand in per_c.into_iter().flatten() {
        trace.evaluated += 1;
        let gpos = cand.g.gamma1_bar > 0.0;
        if gpos {
            trace.gamma1_bar_positive += 1;
        }
        if cand.a >= 0.0 {
            trace.case_a_nonnegative += 1;
        }
        if cand.b >= 0.0 {
            trace.case_b_nonnegative += 1;
        }
        if gpos && cand.a >= 0.0 && cand.b >= 0.0 {
            trace.both_nonnegative += 1;
        }
        if let Some(slot) = trace.best_per_delta.iter_mut().find(|(d, _)| *d == cand.delta) {
            slot.1 = slot.1.max(cand.score);
        }
        if gpos && best_feasible.as_ref().map_or(true, |b| cand.score > b.score) {
            best_feasible = Some(Candidate { ..cand });
            continue;
        }
        if best.as_ref().map_or(true, |b| cand.score > b.score) {
            best = Some(cand);
        }
    }
    let chosen = match (best_feasible, best) {
        (Some(f), _) => f,
        (None, Some(b)) => b,
        (None, None) => return Err(Error::IncompleteInputs("empty search grid".into())),
    };
    let certified = chosen.g.gamma1_bar > 0.0 && chosen.a >= 0.0 && chosen.b >= 0.0;
    let mut warnings = Vec::new();
    if inp.tau_a == 0.0 {
        warnings.push("tau_A = 0: case (a) has no magnetic leverage".to_string());
    }
    Ok(CertificateReport {
        c: chosen.c,
        epsilon: chosen.eps,
        delta: chosen.delta,
        gamma1: chosen.g.gamma1,
        gamma1_tilde: chosen.g.gamma1_tilde,
        gamma1_bar: chosen.g.gamma1_bar,
        gamma2: chosen.g.gamma2,
        slack_case_a: chosen.a,
        slack_case_b: chosen.b,
        delta_star: case_b_delta_star(inp, chosen.c, chosen.eps)?,
        verdict: if certified {
            CertificateVerdict::Certified
        } else {
            CertificateVerdict::Failed
        },
        safety_factor: 0.0,
        inputs: inp.clone(),
        trace,
        warnings,
    })
}

/// Applies [`SAFETY_FACTOR`] to the measured inputs and runs the grid search.
pub fn certify(measured: &CertificateInputs) -> Result<CertificateReport> {
    measured.validate()?;
    let mut rep = certify_raw(&measured.with_safety(SAFETY_FACTOR))?;
    rep.safety_factor = SAFETY_FACTOR;
    Ok(rep)
}

/// Largest amplitude in `[0, hi]` for which `inputs_at(amplitude)` certifies, by
/// bisection. Returns 0 when amplitude 0 itself fails.
pub fn max_certifiable_amplitude(
    inputs_at: impl Fn(f64) -> Result<CertificateInputs>,
    hi: f64,
    iterations: usize,
) -> Result<f64> {
    let ok = |a: f64| -> Result<bool> {
        Ok(certify(&inputs_at(a)?)?.verdict == CertificateVerdict::Certified)
    };
    if !ok(0.0)? {
        return Ok(0.0);
    }
    if ok(hi)? {
        return Ok(hi);
    }
    let (mut lo, mut up) = (0.0, hi);
    for _ in 0..iterations {
        let mid = 0.5 * (lo + up);
        if ok(mid)? {
            lo = mid;
        } else {
            up = mid;
        }
    }
    Ok(lo)
}

/// Measured inputs for one scenario together with the intermediate reports.
#[derive(Clone, Debug, Serialize)]
pub struct Measurement {
    pub inputs: CertificateInputs,
    pub constants: GroundStateConstants,
    pub tau: TauAReport,
}

/// Collects every constant of [`CertificateInputs`] from grid data.
///
/// `deltas` must be admissible for erosion of `cs`; `c_lemma1` comes from the strip
/// sweep.
pub fn measure_inputs(
    cs: &CrossSection,
    twist: &TwistProfile,
    pot: Option<&MagneticPotential>,
    td: &ThresholdData,
    deltas: &[f64],
    c_lemma1: f64,
) -> Result<Measurement> {
    if deltas.is_empty() {
        return Err(Error::IncompleteInputs("empty delta grid".into()));
    }
    let constants = ground_state_constants(td, cs, deltas[0])?;
    let mut f_min_sq = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let mask = cs.erode(d)?;
        let v = td
            .f
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|(f, _)| f * f)
            .fold(f64::INFINITY, f64::min);
        f_min_sq.push((d, v));
    }
    let tau = compute_tau_a(cs, twist, pot)?;
    let a_inf = match pot {
        Some(p) if !p.is_zero() => p.a_inf(cs, twist, 64),
        _ => 0.0,
    };
    let inputs = CertificateInputs {
        e: td.e,
        d: cs.d(),
        mu_inf: twist.mu_inf(),
        mu_dot_inf: twist.mu_dot_inf(),
        a_inf,
        beta0: twist.beta0(),
        tau_a: tau.tau_a,
        f_inf_sq: constants.f_inf * constants.f_inf,
        f_min_sq,
        lap_f_inf: constants.lap_f_inf,
        alpha0: constants.alpha0,
        c0: constants.c0,
        c_lemma1,
    };
    Ok(Measurement {
        inputs,
        constants,
        tau,
    })
}

/// Per-slice Neumann ground energies behind `τ_A`.
#[derive(Clone, Debug, Serialize)]
pub struct TauAReport {
    #[serde(rename = "tau_A")]
    pub tau_a: f64,
    /// `(s, λ₁)` for every sampled slice.
    pub slices: Vec<(f64, f64)>,
    /// `(max − min)/max` over the slices.
    pub spread: f64,
    pub warning: Option<String>,
}

/// Lowest ground energy of the magnetic Neumann slice operators with potential
/// `(Ã cosθ, Ã sinθ)` at 17 slices `s_k = −s₀ + (k+1)·2s₀/18`.
pub fn compute_tau_a(
    cs: &CrossSection,
    twist: &TwistProfile,
    pot: Option<&MagneticPotential>,
) -> Result<TauAReport> {
    let pot = match pot {
        Some(p) if !p.is_zero() => p,
        _ => {
            return Ok(TauAReport {
                tau_a: 0.0,
                slices: Vec::new(),
                spread: 0.0,
                warning: Some("zero field: the Neumann ground energy is 0 (constant mode)".into()),
            })
        }
    };
    let s0 = twist.s0();
    let ss: Vec<f64> = (0..TAU_SLICES)
        .map(|k| -s0 + 2.0 * s0 * (k as f64 + 1.0) / (TAU_SLICES as f64 + 1.0))
        .collect();
    let vals = map_collect(ss.clone(), |s| -> Result<f64> {
        if s.abs() >= pot.s_extent() {
            // No field on this slice: the constant function is a zero mode.
            return Ok(0.0);
        }
        let theta = twist.theta(s);
        let a = move |t2: f64, t3: f64| pot.slice_potential(s, theta, t2, t3);
        slice_neumann_ground(cs, &a)
    });
    let mut slices = Vec::with_capacity(ss.len());
    for (s, v) in ss.into_iter().zip(vals) {
        slices.push((s, v?));
    }
    let lo = slices.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let hi = slices.iter().map(|v| v.1).fold(0.0f64, f64::max);
    let tau_a = lo.max(0.0);
    let warning = if tau_a == 0.0 {
        Some("some slice carries no field: tau_A = 0".into())
    } else {
        None
    };
    Ok(TauAReport {
        tau_a,
        slices,
        spread: if hi > 0.0 { (hi - lo) / hi } else { 0.0 },
        warning,
    })
}

/// Ground energy of the magnetic Neumann operator with slice potential `a`.
pub fn slice_neumann_ground(cs: &CrossSection, a: &dyn Fn(f64, f64) -> [f64; 2]) -> Result<f64> {
    let op = assemble_magnetic_slice(cs, a, SliceBoundary::Neumann);
    let jac = Jacobi::new(&op.diagonal());
    let res = lobpcg(&op, &jac, SolverOptions::new(2, 1e-10))?;
    if !res.converged[0] {
        return Err(Error::NotConverged("Neumann slice ground state".into()));
    }
    Ok(res.eigenvalues[0].max(0.0))
}

/// Human-readable rendering following the inequality chain.
pub fn render_text(r: &CertificateReport) -> String {
    let i = &r.inputs;
    let mut s = String::new();
    let _ = writeln!(s, "certificate: {}", r.verdict.as_str());
    let _ = writeln!(s, "inputs (safety factor {:.0}% applied):", 100.0 * r.safety_factor);
    let _ = writeln!(
        s,
        "  E = {:.8}  d = {:.6}  beta0 = {:.6}",
        i.e, i.d, i.beta0
    );
    let _ = writeln!(
        s,
        "  |mu|_inf = {:.6e}  |mu'|_inf = {:.6e}  |A~|_inf = {:.6e}",
        i.mu_inf, i.mu_dot_inf, i.a_inf
    );
    let _ = writeln!(
        s,
        "  tau_A = {:.6e}  |f|^2_inf = {:.6e}  |lap f|_inf = {:.6e}",
        i.tau_a, i.f_inf_sq, i.lap_f_inf
    );
    let _ = writeln!(
        s,
        "  alpha0 = {:.6e}  c0 = {:.6}  C = {:.6}",
        i.alpha0, i.c0, i.c_lemma1
    );
    let _ = writeln!(s, "chosen c = {:.4e}, eps = {:.4e}, delta = {:.4e}", r.c, r.epsilon, r.delta);
    let _ = writeln!(
        s,
        "  gamma2 = 2d^2(1/c + 2b + 1/2 + 4/(b d^2))|A~|^2 + 2E/b + 1/2 = {:.6e}",
        r.gamma2
    );
    let _ = writeln!(
        s,
        "  gamma1 = max(1/2 - 2d^2(...)max(|mu|,|mu'|), 1/2 - c|mu|) = {:.6e}",
        r.gamma1
    );
    let _ = writeln!(
        s,
        "  gamma1~ = 1 - 32 c d^2 b^2 - 2d^2(...)max(|mu|,|mu'|) = {:.6e}",
        r.gamma1_tilde
    );
    let _ = writeln!(s, "  gamma1_bar = min(gamma1, gamma1~) = {:.6e}", r.gamma1_bar);
    let _ = writeln!(
        s,
        "case (a): gamma1_bar tau_A inf f^2/|f|^2 - 2 gamma2 max(|mu|,|mu'|) - 64 c d^2 b^2 |A~|^2 = {:.6e}",
        r.slack_case_a
    );
    let _ = writeln!(
        s,
        "case (b): gamma1_bar C/(2 delta^2)(1 - eps|lap f|/(2 c0 alpha0)) - gamma1_bar |lap f|/(4 eps alpha0)"
    );
    let _ = writeln!(
        s,
        "          - gamma1_bar |A~|^2 - gamma2 max(|mu|,|mu'|) - 32 c d^2 b^2 |A~|^2 = {:.6e}",
        r.slack_case_b
    );
    match r.delta_star {
        _ if r.gamma1_bar <= 0.0 => {
            let _ = writeln!(s, "  gamma1_bar <= 0 at the chosen c: the chain gives no bound");
        }
        Some(d) if d.is_finite() => {
            let _ = writeln!(s, "  case (b) holds for delta <= {d:.6e} at the chosen (c, eps)");
        }
        Some(_) => {
            let _ = writeln!(s, "  case (b) holds for every delta at the chosen (c, eps)");
        }
        None => {
            let _ = writeln!(s, "  case (b) fails for every delta at the chosen (c, eps)");
        }
    }
    let t = &r.trace;
    let _ = writeln!(
        s,
        "search: {} triples, gamma1_bar > 0: {}, case (a) >= 0: {}, case (b) >= 0: {}, both: {}",
        t.evaluated, t.gamma1_bar_positive, t.case_a_nonnegative, t.case_b_nonnegative, t.both_nonnegative
    );
    for w in &r.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}
