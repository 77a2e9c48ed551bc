//! Executes the configured pipelines and collects every artifact in memory.

use std::fmt::Write as _;

use anyhow::{anyhow, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use twistspec::certificate::{
    certify, compute_tau_a, max_certifiable_amplitude, measure_inputs, render_text, CertificateVerdict,
};
use twistspec::cross_section::{band_function, lemma_constant, strip_sweep, threshold_e, ThresholdData};
use twistspec::discretize::assemble_h_beta0;
use twistspec::geometry::CrossSection;
use twistspec::tube::{
    form_identity_check, probe_with_setup, MagneticPotential, ProbeOptions, ProbeReport, ProbeSetup,
    TwistProfile, Verdict,
};

use crate::config::{Pipeline, RunConfig};

/// A named output file.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    PipelineError,
    /// Certified while the probe found a stable eigenvalue below the threshold.
    Inconsistent,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Ok => 0,
            Self::PipelineError => 2,
            Self::Inconsistent => 3,
        }
    }
}

/// Headline numbers of one run, as used by sweep tables.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Headline {
    #[serde(rename = "E")]
    pub e: Option<f64>,
    pub gap_vs_beta0_zero: Option<f64>,
    pub band_p_min: Option<f64>,
    pub band_e_min: Option<f64>,
    pub lambda1_at_max_l: Option<f64>,
    pub n_below_e: Option<usize>,
    pub verdict: Option<String>,
    pub certificate: Option<String>,
    pub slack_case_a: Option<f64>,
    pub slack_case_b: Option<f64>,
    pub identity_max_discrepancy: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub results: Value,
    pub artifacts: Vec<Artifact>,
    pub outcome: Outcome,
    pub headline: Headline,
    pub errors: Vec<String>,
}

fn artifact(name: &str, contents: impl Into<Vec<u8>>) -> Artifact {
    Artifact {
        name: name.to_string(),
        contents: contents.into(),
    }
}

fn csv_artifact<R: Serialize>(name: &str, rows: &[R]) -> Result<Artifact> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(artifact(name, w.into_inner().map_err(|e| anyhow!("{e}"))?))
}

/// Two-column whitespace-separated curve with a comment header.
fn curve(name: &str, header: &str, points: &[(f64, f64)]) -> Artifact {
    let mut s = format!("# {header}\n");
    for (x, y) in points {
        writeln!(s, "{x:.12e} {y:.12e}").unwrap();
    }
    artifact(name, s)
}

fn json_artifact(name: &str, v: &impl Serialize) -> Result<Artifact> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(artifact(name, s))
}

/// `f` along the grid row and column through the point nearest the origin.
fn axis_profiles(cs: &CrossSection, f: &[f64]) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let centre = cs.nearest_to_origin();
    let (ci, cj) = cs.grid_indices()[centre];
    let mut row = Vec::new();
    let mut col = Vec::new();
    for (p, &(i, j)) in cs.grid_indices().iter().enumerate() {
        let (x, y) = cs.coords()[p];
        if j == cj {
            row.push((x, f[p]));
        }
        if i == ci {
            col.push((y, f[p]));
        }
    }
    row.sort_by(|a, b| a.0.total_cmp(&b.0));
    col.sort_by(|a, b| a.0.total_cmp(&b.0));
    (row, col)
}

struct Scenario<'a> {
    cfg: &'a RunConfig,
    cs: CrossSection,
}

impl Scenario<'_> {
    fn twist(&self) -> Result<TwistProfile> {
        Ok(match self.cfg.mu {
            Some(mu) => TwistProfile::new(self.cfg.beta0, mu)?,
            None => TwistProfile::periodic(self.cfg.beta0),
        })
    }

    fn potential(&self) -> Option<MagneticPotential> {
        self.cfg
            .potential
            .and_then(|p| p.spec())
            .map(MagneticPotential::from_spec)
    }

    fn probe_options(&self) -> ProbeOptions {
        let s = &self.cfg.solver;
        ProbeOptions {
            k: s.k,
            tol: s.tol,
            seed: s.seed,
            ds: self.cfg.ds,
            n_modes: s.n_modes,
            max_iter: s.max_iter,
        }
    }
}

#[derive(Serialize)]
struct ThresholdRow {
    beta0: f64,
    #[serde(rename = "E")]
    e: f64,
    gap_vs_beta0_zero: f64,
}

fn run_threshold(ctx: &Scenario, out: &mut Vec<Artifact>, head: &mut Headline) -> Result<(ThresholdData, Value)> {
    let cfg = ctx.cfg;
    let tol = cfg.solver.tol;
    let td = threshold_e(&ctx.cs, cfg.beta0, tol).context("threshold")?;
    let e0 = if cfg.beta0 == 0.0 {
        td.e
    } else {
        threshold_e(&ctx.cs, 0.0, tol).context("threshold at beta0 = 0")?.e
    };
    let mut rows = vec![ThresholdRow { beta0: 0.0, e: e0, gap_vs_beta0_zero: 0.0 }];
    if cfg.beta0 != 0.0 {
        rows.push(ThresholdRow { beta0: cfg.beta0, e: td.e, gap_vs_beta0_zero: td.e - e0 });
    }
    out.push(csv_artifact("threshold.csv", &rows)?);
    let (row, col) = axis_profiles(&ctx.cs, &td.f);
    out.push(curve("f_profile_t2.dat", "t2 f(t2, 0)", &row));
    out.push(curve("f_profile_t3.dat", "t3 f(0, t3)", &col));
    if cfg.export_operator {
        let op = assemble_h_beta0(&ctx.cs, cfg.beta0);
        let mut buf = Vec::new();
        op.matrix.write_triplets(&mut buf)?;
        out.push(artifact("h_beta0.triplets", buf));
    }
    head.e = Some(td.e);
    head.gap_vs_beta0_zero = Some(td.e - e0);
    let v = json!({
        "E": td.e,
        "E_beta0_zero": e0,
        "gap_vs_beta0_zero": td.e - e0,
        "E2": td.e2,
        "beta0": cfg.beta0,
        "h": ctx.cs.h(),
        "n_points": ctx.cs.len(),
        "d": ctx.cs.d(),
        "iterations": td.iterations,
    });
    Ok((td, v))
}

#[derive(Serialize)]
struct BandRow {
    p: f64,
    #[serde(rename = "E1")]
    e1: f64,
}

fn run_bands(ctx: &Scenario, e: f64, out: &mut Vec<Artifact>, head: &mut Headline) -> Result<Value> {
    let grid = ctx.cfg.bands.grid();
    let b = band_function(&ctx.cs, ctx.cfg.beta0, &grid, ctx.cfg.solver.tol).context("bands")?;
    let rows: Vec<BandRow> = b.points.iter().map(|&(p, e1)| BandRow { p, e1 }).collect();
    out.push(csv_artifact("bands.csv", &rows)?);
    out.push(curve("band_dispersion.dat", "p E1(p)", &b.points));
    head.band_p_min = Some(b.p_min);
    head.band_e_min = Some(b.e_min);
    Ok(json!({
        "p_min": b.p_min,
        "E_min": b.e_min,
        "E": e,
        "min_at_zero": b.p_min == 0.0,
        "E_min_minus_E": b.e_min - e,
        "points": b.points,
    }))
}

#[derive(Serialize)]
struct ProbeRow {
    #[serde(rename = "L")]
    l: f64,
    index: usize,
    lambda: f64,
    #[serde(rename = "below_E")]
    below_e: bool,
}

fn run_probe(ctx: &Scenario, out: &mut Vec<Artifact>, head: &mut Headline) -> Result<ProbeReport> {
    let cfg = ctx.cfg;
    let twist = ctx.twist()?;
    let pot = ctx.potential();
    let opts = ctx.probe_options();
    let setup = ProbeSetup::new(&ctx.cs, cfg.beta0, opts.n_modes, opts.tol).context("probe setup")?;
    let mut rep = probe_with_setup(&ctx.cs, &twist, pot.as_ref(), &cfg.l_list, &opts, &setup).context("probe")?;
    if cfg.l_list.len() < 3 && !rep.partial {
        rep.verdict = Verdict::Inconclusive;
    }
    let mut rows = Vec::new();
    for (l, ev) in rep.l_values.iter().zip(&rep.eigenvalues) {
        for (i, &lam) in ev.iter().enumerate() {
            rows.push(ProbeRow { l: *l, index: i + 1, lambda: lam, below_e: lam < rep.e - rep.margin });
        }
    }
    out.push(json_artifact("probe.json", &rep)?);
    out.push(csv_artifact("probe.csv", &rows)?);
    let k = rep.eigenvalues.iter().map(Vec::len).min().unwrap_or(0);
    for i in 0..k {
        let pts: Vec<(f64, f64)> = rep.l_values.iter().zip(&rep.eigenvalues).map(|(&l, v)| (l, v[i])).collect();
        out.push(curve(&format!("lambda{}_vs_L.dat", i + 1), &format!("L lambda{}(L)", i + 1), &pts));
    }
    head.lambda1_at_max_l = rep.eigenvalues.last().map(|v| v[0]);
    head.n_below_e = rep.below_e.last().map(Vec::len);
    head.verdict = Some(rep.verdict.as_str().to_string());
    Ok(rep)
}

fn run_certificate(
    ctx: &Scenario,
    td: &ThresholdData,
    out: &mut Vec<Artifact>,
    head: &mut Headline,
) -> Result<CertificateVerdict> {
    let cfg = ctx.cfg;
    let twist = ctx.twist()?;
    let pot = ctx.potential();
    let deltas = cfg
        .certificate
        .delta_grid
        .clone()
        .ok_or_else(|| anyhow!("certificate: delta grid was not resolved"))?;
    let strips = strip_sweep(&cfg.certificate.strip_deltas).context("certificate: strip sweep")?;
    let c = lemma_constant(&strips);
    let m = measure_inputs(&ctx.cs, &twist, pot.as_ref(), td, &deltas, c).context("certificate: measurement")?;
    let rep = certify(&m.inputs).context("certificate")?;
    let max_amp = match (cfg.certificate.max_amplitude_search, cfg.mu) {
        (true, Some(mu)) => {
            let base = m.inputs.clone();
            let inputs_at = |amp: f64| {
                let tw = TwistProfile::new(cfg.beta0, mu.with_amplitude(amp))?;
                let tau = compute_tau_a(&ctx.cs, &tw, pot.as_ref())?;
                let mut x = base.clone();
                x.mu_inf = tw.mu_inf();
                x.mu_dot_inf = tw.mu_dot_inf();
                x.tau_a = tau.tau_a;
                if let Some(p) = pot.as_ref().filter(|p| !p.is_zero()) {
                    x.a_inf = p.a_inf(&ctx.cs, &tw, 64);
                }
                Ok(x)
            };
            Some(max_certifiable_amplitude(inputs_at, 0.999 * cfg.beta0, 12).context("certificate: amplitude search")?)
        }
        _ => None,
    };
    let v = json!({
        "report": rep,
        "measured_inputs": m.inputs,
        "ground_state_constants": m.constants,
        "tau_A": m.tau,
        "c_lemma1": c,
        "strip_checks": strips,
        "max_certifiable_amplitude": max_amp,
    });
    out.push(json_artifact("certificate.json", &v)?);
    out.push(artifact("certificate.txt", render_text(&rep)));
    head.certificate = Some(rep.verdict.as_str().to_string());
    head.slack_case_a = Some(rep.slack_case_a);
    head.slack_case_b = Some(rep.slack_case_b);
    Ok(rep.verdict)
}

#[derive(Serialize)]
struct IdentityRow {
    index: usize,
    lhs: f64,
    rhs: f64,
    discrepancy: f64,
    magnetic_term: f64,
    longitudinal_term: f64,
    i_mu: f64,
}

fn run_identity(ctx: &Scenario, td: &ThresholdData, out: &mut Vec<Artifact>, head: &mut Headline) -> Result<Value> {
    let twist = ctx.twist()?;
    let pot = ctx.potential();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (i, tf) in ctx.cfg.identity_check.test_functions.iter().enumerate() {
        let r = form_identity_check(&ctx.cs, &twist, pot.as_ref(), td, tf)
            .with_context(|| format!("identity_check: test function {}", i + 1))?;
        rows.push(IdentityRow {
            index: i + 1,
            lhs: r.lhs,
            rhs: r.rhs,
            discrepancy: r.discrepancy,
            magnetic_term: r.magnetic_term,
            longitudinal_term: r.longitudinal_term,
            i_mu: r.i_mu,
        });
        reports.push(json!({"test_function": tf, "report": r}));
    }
    out.push(csv_artifact("identity.csv", &rows)?);
    head.identity_max_discrepancy = rows.iter().map(|r| r.discrepancy).reduce(f64::max);
    Ok(Value::Array(reports))
}

/// Runs every requested pipeline of a validated, resolved config.
pub fn execute(cfg: &RunConfig) -> RunOutput {
    let mut artifacts = Vec::new();
    let mut head = Headline::default();
    let mut results = serde_json::Map::new();
    results.insert("config".into(), serde_json::to_value(cfg).unwrap_or(Value::Null));
    let mut errors: Vec<String> = Vec::new();
    let mut outcome = Outcome::Ok;

    if !cfg.pipeline.is_empty() {
        match build_context(cfg) {
            Err(e) => errors.push(format!("{e:#}")),
            Ok(ctx) => run_all(&ctx, &mut results, &mut artifacts, &mut head, &mut errors, &mut outcome),
        }
    }
    if !errors.is_empty() && outcome == Outcome::Ok {
        outcome = Outcome::PipelineError;
    }
    results.insert("status".into(), json!(outcome));
    results.insert("errors".into(), json!(errors));
    let results = Value::Object(results);
    if let Ok(a) = json_artifact("results.json", &results) {
        artifacts.push(a);
    }
    RunOutput {
        results,
        artifacts,
        outcome,
        headline: head,
        errors,
    }
}

fn build_context(cfg: &RunConfig) -> Result<Scenario<'_>> {
    let shape = cfg.cross_section.shape().context("cross_section")?;
    let cs = CrossSection::build(shape, cfg.cross_section.h).context("cross_section")?;
    Ok(Scenario { cfg, cs })
}

fn run_all(
    ctx: &Scenario,
    results: &mut serde_json::Map<String, Value>,
    artifacts: &mut Vec<Artifact>,
    head: &mut Headline,
    errors: &mut Vec<String>,
    outcome: &mut Outcome,
) {
    let cfg = ctx.cfg;
    let needs_threshold = cfg.has(Pipeline::Threshold)
        || cfg.has(Pipeline::Bands)
        || cfg.has(Pipeline::Certificate)
        || cfg.has(Pipeline::IdentityCheck);
    let td = if needs_threshold {
        match run_threshold(ctx, artifacts, head) {
            Ok((td, v)) => {
                results.insert("threshold".into(), v);
                Some(td)
            }
            Err(e) => {
                errors.push(format!("{e:#}"));
                None
            }
        }
    } else {
        None
    };
    let skipped = |p: Pipeline| format!("{}: skipped because the threshold failed", p.name());

    if cfg.has(Pipeline::Bands) {
        match &td {
            Some(td) => match run_bands(ctx, td.e, artifacts, head) {
                Ok(v) => {
                    results.insert("bands".into(), v);
                }
                Err(e) => errors.push(format!("{e:#}")),
            },
            None => errors.push(skipped(Pipeline::Bands)),
        }
    }

    let mut probe_verdict = None;
    if cfg.has(Pipeline::Probe) {
        match run_probe(ctx, artifacts, head) {
            Ok(rep) => {
                probe_verdict = Some(rep.verdict);
                for e in &rep.errors {
                    errors.push(format!("probe: {e}"));
                }
                results.insert("probe".into(), serde_json::to_value(&rep).unwrap_or(Value::Null));
            }
            Err(e) => errors.push(format!("{e:#}")),
        }
    }

    let mut cert_verdict = None;
    if cfg.has(Pipeline::Certificate) {
        match &td {
            Some(td) => match run_certificate(ctx, td, artifacts, head) {
                Ok(v) => {
                    cert_verdict = Some(v);
                    if let Some(a) = artifacts.iter().find(|a| a.name == "certificate.json") {
                        if let Ok(val) = serde_json::from_slice::<Value>(&a.contents) {
                            results.insert("certificate".into(), val);
                        }
                    }
                }
                Err(e) => errors.push(format!("{e:#}")),
            },
            None => errors.push(skipped(Pipeline::Certificate)),
        }
    }

    if cfg.has(Pipeline::IdentityCheck) {
        match &td {
            Some(td) => match run_identity(ctx, td, artifacts, head) {
                Ok(v) => {
                    results.insert("identity_check".into(), v);
                }
                Err(e) => errors.push(format!("{e:#}")),
            },
            None => errors.push(skipped(Pipeline::IdentityCheck)),
        }
    }

    let violation = cert_verdict == Some(CertificateVerdict::Certified) && probe_verdict == Some(Verdict::BoundState);
    if cert_verdict.is_some() && probe_verdict.is_some() {
        results.insert(
            "consistency".into(),
            json!({"checked": true, "violation": violation}),
        );
    }
    if violation {
        errors.push("consistency: certified although the probe found a stable eigenvalue below E".into());
        *outcome = Outcome::Inconsistent;
    }
}
