//! Run configuration: parsing, validation and default resolution.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use twistspec::eigensolve::DEFAULT_SEED;
use twistspec::geometry::{CrossSection, ShapeSpec};
use twistspec::tube::{MuSpec, PotentialSpec, TestFunction};

/// Environment variable overriding `solver.seed`.
pub const SEED_ENV: &str = "TWISTSPEC_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Threshold,
    Bands,
    Probe,
    Certificate,
    IdentityCheck,
}

impl Pipeline {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Threshold => "threshold",
            Self::Bands => "bands",
            Self::Probe => "probe",
            Self::Certificate => "certificate",
            Self::IdentityCheck => "identity_check",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossSectionConfig {
    pub kind: String,
    pub params: Vec<f64>,
    pub h: f64,
}

impl CrossSectionConfig {
    pub fn shape(&self) -> twistspec::Result<ShapeSpec> {
        ShapeSpec::from_kind_params(&self.kind, &self.params)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoField {
    None,
}

/// `"none"` or a potential family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialConfig {
    None(NoField),
    Field(PotentialSpec),
}

impl PotentialConfig {
    pub fn spec(&self) -> Option<PotentialSpec> {
        match self {
            Self::None(_) => None,
            Self::Field(s) => Some(*s),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub k: usize,
    pub tol: f64,
    pub seed: u64,
    /// Cross-section modes used to precondition tube solves.
    pub n_modes: usize,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            k: 6,
            tol: 1e-8,
            seed: DEFAULT_SEED,
            n_modes: 24,
            max_iter: 2000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandsConfig {
    pub p_max: f64,
    /// Odd, so that the grid contains `p = 0`.
    pub n_points: usize,
}

impl Default for BandsConfig {
    fn default() -> Self {
        Self { p_max: 3.0, n_points: 41 }
    }
}

impl BandsConfig {
    pub fn grid(&self) -> Vec<f64> {
        let m = (self.n_points / 2) as i64;
        (-m..=m).map(|i| self.p_max * i as f64 / m.max(1) as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertificateConfig {
    /// Erosion depths; filled from the cross-section when absent.
    pub delta_grid: Option<Vec<f64>>,
    /// Strip widths for the Poincaré constant.
    pub strip_deltas: Vec<f64>,
    /// Bisection over the μ amplitude for the largest certified value.
    pub max_amplitude_search: bool,
}

impl Default for CertificateConfig {
    fn default() -> Self {
        Self {
            delta_grid: None,
            strip_deltas: vec![0.2, 0.1, 0.05],
            max_amplitude_search: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentityConfig {
    pub test_functions: Vec<TestFunction>,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        Self {
            test_functions: vec![
                TestFunction::Centered { s_width: 1.5, radius: 0.7, phase: 0.0 },
                TestFunction::Centered { s_width: 1.5, radius: 0.7, phase: 2.0 },
                TestFunction::Annulus { s_width: 1.5, inner: 0.4, outer: 0.9, phase: 1.0 },
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cross_section: CrossSectionConfig,
    pub beta0: f64,
    /// Slowdown profile; absent means an unperturbed twist.
    #[serde(default)]
    pub mu: Option<MuSpec>,
    /// Required by the certificate pipeline, where `"none"` is the explicit zero field.
    #[serde(default)]
    pub potential: Option<PotentialConfig>,
    #[serde(rename = "L_list", default)]
    pub l_list: Vec<f64>,
    #[serde(default = "default_ds")]
    pub ds: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    pub pipeline: Vec<Pipeline>,
    #[serde(default)]
    pub bands: BandsConfig,
    #[serde(default)]
    pub certificate: CertificateConfig,
    #[serde(default)]
    pub identity_check: IdentityConfig,
    /// Writes `h_{β₀}` as coordinate triplets next to the threshold outputs.
    #[serde(default)]
    pub export_operator: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_ds() -> f64 {
    0.125
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("twistspec-out")
}

/// Schema or consistency problem in a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: ")?,
            (Some(l), None) => write!(f, "line {l}: ")?,
            _ => {}
        }
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "field `{}`: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// First line mentioning the last key of `path`, for diagnostics after parsing.
fn locate(text: &str, path: &str) -> Option<usize> {
    let key = path.rsplit('.').find(|k| !k.is_empty() && !k.starts_with('['))?;
    let key = key.split('[').next()?;
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

impl RunConfig {
    /// Parses JSON text with field-path diagnostics.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ConfigError {
                path,
                line: Some(inner.line()),
                column: Some(inner.column()),
                message: strip_position(&inner.to_string()),
            }
        })?;
        cfg.validate().map_err(|mut e| {
            e.line = locate(text, &e.path);
            e
        })?;
        Ok(cfg)
    }

    fn err(path: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            path: path.to_string(),
            line: None,
            column: None,
            message: message.into(),
        }
    }

    pub fn has(&self, p: Pipeline) -> bool {
        self.pipeline.contains(&p)
    }

    /// Semantic checks beyond the schema.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let shape = self
            .cross_section
            .shape()
            .map_err(|e| Self::err("cross_section.params", e.to_string()))?;
        let h = self.cross_section.h;
        if !(h.is_finite() && h > 0.0) {
            return Err(Self::err("cross_section.h", format!("must be positive, got {h}")));
        }
        if shape.min_diameter() / h < 8.0 {
            return Err(Self::err(
                "cross_section.h",
                format!("{h} leaves fewer than 8 grid spacings across the shape"),
            ));
        }
        if !(self.beta0.is_finite() && self.beta0 >= 0.0) {
            return Err(Self::err("beta0", format!("must be nonnegative, got {}", self.beta0)));
        }
        let s = &self.solver;
        if s.k == 0 {
            return Err(Self::err("solver.k", "must be at least 1"));
        }
        if !(1e-14..=1e-2).contains(&s.tol) {
            return Err(Self::err("solver.tol", format!("must lie in [1e-14, 1e-2], got {}", s.tol)));
        }
        if s.n_modes == 0 || s.max_iter == 0 {
            return Err(Self::err("solver", "n_modes and max_iter must be positive"));
        }
        if !(self.ds.is_finite() && self.ds > 0.0) {
            return Err(Self::err("ds", format!("must be positive, got {}", self.ds)));
        }
        let mut seen = self.pipeline.clone();
        seen.sort();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Self::err("pipeline", "lists a pipeline twice"));
        }
        let needs_twist = self.has(Pipeline::Probe)
            || self.has(Pipeline::Certificate)
            || self.has(Pipeline::IdentityCheck);
        if needs_twist && self.beta0 <= 0.0 {
            return Err(Self::err("beta0", "must be positive for probe, certificate and identity_check"));
        }
        if let Some(mu) = self.mu {
            twistspec::tube::TwistProfile::new(self.beta0, mu).map_err(|e| Self::err("mu", e.to_string()))?;
        }
        if self.has(Pipeline::Probe) {
            if self.l_list.is_empty() {
                return Err(Self::err("L_list", "the probe pipeline needs at least one half-length"));
            }
            if self.l_list.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
                return Err(Self::err("L_list", "half-lengths must be positive"));
            }
            if self.l_list.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Self::err("L_list", "must be strictly ascending"));
            }
        }
        if self.has(Pipeline::Certificate) && self.potential.is_none() {
            return Err(Self::err(
                "potential",
                "the certificate pipeline needs a potential, or \"none\" for zero field",
            ));
        }
        if let Some(p) = self.potential.and_then(|p| p.spec()) {
            if !(p.width() > 0.0 && p.width().is_finite() && p.amplitude().is_finite()) {
                return Err(Self::err("potential", "width must be positive and amplitude finite"));
            }
        }
        if self.has(Pipeline::Bands) {
            let b = &self.bands;
            if b.n_points < 3 || b.n_points % 2 == 0 {
                return Err(Self::err("bands.n_points", "must be odd and at least 3"));
            }
            if !(b.p_max > 0.0 && b.p_max.is_finite()) {
                return Err(Self::err("bands.p_max", "must be positive"));
            }
        }
        if self.has(Pipeline::Certificate) {
            let c = &self.certificate;
            if c.strip_deltas.is_empty() || c.strip_deltas.iter().any(|&d| !(d > 0.0)) {
                return Err(Self::err("certificate.strip_deltas", "needs positive widths"));
            }
            if let Some(g) = &c.delta_grid {
                if g.is_empty() || g.iter().any(|&d| !(d > 0.0)) {
                    return Err(Self::err("certificate.delta_grid", "needs positive depths"));
                }
            }
        }
        if self.has(Pipeline::IdentityCheck) && self.identity_check.test_functions.is_empty() {
            return Err(Self::err("identity_check.test_functions", "is empty"));
        }
        Ok(())
    }

    /// Materializes defaults that depend on the environment and the geometry.
    pub fn resolve(mut self, seed_override: Option<u64>) -> Result<Self, ConfigError> {
        if let Some(seed) = seed_override {
            self.solver.seed = seed;
        }
        if self.potential.is_none() {
            self.potential = Some(PotentialConfig::None(NoField::None));
        }
        if self.has(Pipeline::Certificate) && self.certificate.delta_grid.is_none() {
            let shape = self
                .cross_section
                .shape()
                .map_err(|e| Self::err("cross_section", e.to_string()))?;
            let cs = CrossSection::build(shape, self.cross_section.h)
                .map_err(|e| Self::err("cross_section", e.to_string()))?;
            let t = cs.max_tau();
            self.certificate.delta_grid =
                Some([0.1, 0.2, 0.3, 0.4, 0.5, 0.6].iter().map(|f| f * t).collect());
        }
        Ok(self)
    }
}

/// Seed from [`SEED_ENV`], if set.
pub fn seed_from_env() -> Result<Option<u64>, ConfigError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse::<u64>().map(Some).map_err(|e| ConfigError {
            path: SEED_ENV.to_string(),
            line: None,
            column: None,
            message: format!("not an unsigned integer ({e}): {v:?}"),
        }),
        Err(_) => Ok(None),
    }
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "cross_section": {"kind": "rectangle", "params": [1, 1], "h": 0.015625},
  "beta0": 0,
  "pipeline": ["threshold"]
}"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.bands.grid().len(), 41);
        let r = c.resolve(Some(7)).unwrap();
        assert_eq!(r.solver.seed, 7);
        assert_eq!(r.potential, Some(PotentialConfig::None(NoField::None)));
    }

    #[test]
    fn type_errors_carry_line_and_path() {
        let bad = MINIMAL.replace("\"h\": 0.015625", "\"h\": \"fine\"");
        let e = RunConfig::from_json(&bad).unwrap_err();
        assert_eq!(e.path, "cross_section.h");
        assert_eq!(e.line, Some(2));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = MINIMAL.replace("\"beta0\"", "\"beta\"");
        let e = RunConfig::from_json(&bad).unwrap_err();
        assert!(e.message.contains("unknown field"), "{e}");
    }

    #[test]
    fn missing_prerequisites_are_reported() {
        let probe = MINIMAL.replace("[\"threshold\"]", "[\"probe\"]").replace("\"beta0\": 0", "\"beta0\": 1");
        let e = RunConfig::from_json(&probe).unwrap_err();
        assert_eq!(e.path, "L_list");
        let cert = MINIMAL.replace("[\"threshold\"]", "[\"certificate\"]").replace("\"beta0\": 0", "\"beta0\": 1");
        let e = RunConfig::from_json(&cert).unwrap_err();
        assert_eq!(e.path, "potential");
        let ok = cert.replace("\"pipeline\"", "\"potential\": \"none\", \"pipeline\"");
        assert!(RunConfig::from_json(&ok).is_ok());
    }

    #[test]
    fn potential_accepts_none_or_family() {
        let field = MINIMAL.replace(
            "\"pipeline\"",
            "\"potential\": {\"kind\": \"gaussian\", \"amplitude\": 1, \"width\": 0.3}, \"pipeline\"",
        );
        let c = RunConfig::from_json(&field).unwrap();
        assert_eq!(
            c.potential,
            Some(PotentialConfig::Field(PotentialSpec::Gaussian { amplitude: 1.0, width: 0.3 }))
        );
        let bad = MINIMAL.replace("\"pipeline\"", "\"potential\": \"off\", \"pipeline\"");
        assert!(RunConfig::from_json(&bad).is_err());
    }

    #[test]
    fn semantic_errors_point_at_the_line() {
        let bad = MINIMAL.replace("0.015625", "0.5");
        let e = RunConfig::from_json(&bad).unwrap_err();
        assert_eq!(e.path, "cross_section.h");
        assert_eq!(e.line, Some(2));
    }
}
