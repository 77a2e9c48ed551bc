//! One-parameter sweeps over a base config.

use std::str::FromStr;

use anyhow::{anyhow, bail, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{PotentialConfig, RunConfig};
use crate::pipeline::{execute, Headline, Outcome, RunOutput};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SweepParam {
    #[serde(rename = "beta0")]
    Beta0,
    #[serde(rename = "mu.amplitude")]
    MuAmplitude,
    #[serde(rename = "potential.amplitude")]
    PotentialAmplitude,
    #[serde(rename = "h")]
    H,
    #[serde(rename = "L")]
    L,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Beta0 => "beta0",
            Self::MuAmplitude => "mu.amplitude",
            Self::PotentialAmplitude => "potential.amplitude",
            Self::H => "h",
            Self::L => "L",
        }
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "beta0" => Self::Beta0,
            "mu.amplitude" => Self::MuAmplitude,
            "potential.amplitude" => Self::PotentialAmplitude,
            "h" => Self::H,
            "L" => Self::L,
            _ => {
                return Err(format!(
                    "unknown sweep parameter {s:?}; expected beta0, mu.amplitude, potential.amplitude, h or L"
                ))
            }
        })
    }
}

/// Checks that `param` can be applied to `base` at all.
pub fn check_param(base: &RunConfig, param: SweepParam) -> Result<()> {
    match param {
        SweepParam::MuAmplitude if base.mu.is_none() => bail!("sweeping mu.amplitude needs a `mu` entry"),
        SweepParam::PotentialAmplitude if !matches!(base.potential, Some(PotentialConfig::Field(_))) => {
            bail!("sweeping potential.amplitude needs a potential object")
        }
        _ => Ok(()),
    }
}

/// `base` with `param` set to `value`. `L` replaces the whole L list.
pub fn apply(base: &RunConfig, param: SweepParam, value: f64) -> Result<RunConfig> {
    let mut c = base.clone();
    match param {
        SweepParam::Beta0 => c.beta0 = value,
        SweepParam::MuAmplitude => {
            let mu = c.mu.ok_or_else(|| anyhow!("no mu entry"))?;
            c.mu = Some(mu.with_amplitude(value));
        }
        SweepParam::PotentialAmplitude => match c.potential {
            Some(PotentialConfig::Field(p)) => c.potential = Some(PotentialConfig::Field(p.with_amplitude(value))),
            _ => bail!("no potential object"),
        },
        SweepParam::H => {
            c.cross_section.h = value;
            // The erosion depths follow the grid unless given explicitly.
            if base.certificate.delta_grid.is_none() {
                c.certificate.delta_grid = None;
            }
        }
        SweepParam::L => c.l_list = vec![value],
    }
    Ok(c)
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub param: &'static str,
    pub value: f64,
    pub status: String,
    pub headline: Headline,
    pub message: String,
}

/// Flat record for CSV output.
#[derive(Serialize)]
struct FlatRow<'a> {
    param: &'a str,
    value: f64,
    status: &'a str,
    #[serde(rename = "E")]
    e: Option<f64>,
    gap_vs_beta0_zero: Option<f64>,
    band_p_min: Option<f64>,
    band_e_min: Option<f64>,
    lambda1_at_max_l: Option<f64>,
    n_below_e: Option<usize>,
    verdict: Option<&'a str>,
    certificate: Option<&'a str>,
    slack_case_a: Option<f64>,
    slack_case_b: Option<f64>,
    identity_max_discrepancy: Option<f64>,
    message: &'a str,
}

impl SweepRow {
    fn flat(&self) -> FlatRow<'_> {
        let h = &self.headline;
        FlatRow {
            param: self.param,
            value: self.value,
            status: &self.status,
            e: h.e,
            gap_vs_beta0_zero: h.gap_vs_beta0_zero,
            band_p_min: h.band_p_min,
            band_e_min: h.band_e_min,
            lambda1_at_max_l: h.lambda1_at_max_l,
            n_below_e: h.n_below_e,
            verdict: h.verdict.as_deref(),
            certificate: h.certificate.as_deref(),
            slack_case_a: h.slack_case_a,
            slack_case_b: h.slack_case_b,
            identity_max_discrepancy: h.identity_max_discrepancy,
            message: &self.message,
        }
    }
}

impl Serialize for SweepRow {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.flat().serialize(s)
    }
}

pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Per-value run output, or `None` when the value produced an invalid config.
    pub runs: Vec<Option<RunOutput>>,
}

impl SweepResult {
    pub fn outcome(&self) -> Outcome {
        if self.runs.iter().flatten().any(|r| r.outcome == Outcome::Inconsistent) {
            Outcome::Inconsistent
        } else if self.rows.iter().any(|r| r.status != "ok") {
            Outcome::PipelineError
        } else {
            Outcome::Ok
        }
    }
}

fn one(base: &RunConfig, param: SweepParam, value: f64, seed: Option<u64>) -> (SweepRow, Option<RunOutput>) {
    let prepared = apply(base, param, value).and_then(|c| {
        c.validate().map_err(|e| anyhow!("{e}"))?;
        c.resolve(seed).map_err(|e| anyhow!("{e}"))
    });
    match prepared {
        Err(e) => (
            SweepRow {
                param: param.name(),
                value,
                status: "failed".into(),
                headline: Headline::default(),
                message: format!("invalid: {e}"),
            },
            None,
        ),
        Ok(cfg) => {
            let out = execute(&cfg);
            let status = match out.outcome {
                Outcome::Ok => "ok",
                Outcome::PipelineError => "failed",
                Outcome::Inconsistent => "inconsistent",
            };
            (
                SweepRow {
                    param: param.name(),
                    value,
                    status: status.into(),
                    headline: out.headline.clone(),
                    message: out.errors.join("; "),
                },
                Some(out),
            )
        }
    }
}

/// Runs every value concurrently; rows keep the order of `values`.
pub fn run_sweep(base: &RunConfig, param: SweepParam, values: &[f64], seed: Option<u64>) -> SweepResult {
    let (rows, runs) = values.par_iter().map(|&v| one(base, param, v, seed)).unzip();
    SweepResult { rows, runs }
}

/// Aggregate CSV of a sweep.
pub fn rows_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| anyhow!("{e}"))
}

pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    let vals: Result<Vec<f64>, _> = s.split(',').map(|v| parse_number(v.trim())).collect();
    let vals = vals?;
    if vals.is_empty() {
        bail!("no sweep values");
    }
    Ok(vals)
}

/// A decimal number or a fraction `p/q`.
fn parse_number(s: &str) -> Result<f64> {
    if let Some((p, q)) = s.split_once('/') {
        let (p, q): (f64, f64) = (p.trim().parse()?, q.trim().parse()?);
        return Ok(p / q);
    }
    s.parse::<f64>().map_err(|e| anyhow!("bad sweep value {s:?}: {e}"))
}
