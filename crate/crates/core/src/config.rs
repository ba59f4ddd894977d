//! TOML scenario files.
//!
//! ```toml
//! L_km = 10.0
//! n = 5
//! delta_s = 30.0
//! T = 20
//! epsilon = 0.985
//! beta = 0.95
//! gamma = [40, 60, 80, 100, 120]
//! # pi = 1.0        (optional)
//! # eta_bar = 0.05  (optional)
//!
//! [[segments]]
//! f_bar = 3.1e4
//! rho_bar = 1050
//! u_bar = 140
//! f_U = 3.1e4
//! rho_U = 1050
//!
//! [generator]          # optional
//! n_samples = 3
//! seed = 1
//! rho0 = 260           # scalar, [lo, hi], or one [lo, hi] per edge
//! omega = [[2e4, 2.4e4], [-1500, 2500]]   # [lo, hi] or one per edge
//!
//! [validation]         # optional
//! T_val = 60
//! n_val = 1000
//! ```
//!
//! Every invariant is checked at load time; the error names the key path of
//! the first violation, e.g. `segments[3].f_U`.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::network::{HighwayScenario, ScenarioParams, SegmentParams};
use crate::sampling::GeneratorSpec;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(rename = "L_km")]
    length_km: f64,
    n: usize,
    delta_s: f64,
    #[serde(rename = "T")]
    horizon: usize,
    pi: Option<f64>,
    eta_bar: Option<f64>,
    epsilon: f64,
    beta: f64,
    gamma: Vec<f64>,
    segments: Vec<RawSegment>,
    generator: Option<RawGenerator>,
    validation: Option<RawValidation>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSegment {
    f_bar: f64,
    rho_bar: f64,
    u_bar: f64,
    #[serde(rename = "f_U")]
    f_incident: Option<f64>,
    #[serde(rename = "rho_U")]
    rho_incident: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Bounds {
    Scalar(f64),
    Range([f64; 2]),
    PerEdge(Vec<[f64; 2]>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenerator {
    n_samples: usize,
    seed: Option<u64>,
    rho0: Bounds,
    omega: Bounds,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValidation {
    #[serde(rename = "T_val")]
    horizon: Option<usize>,
    n_val: Option<usize>,
}

/// Sampling section of a scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub spec: GeneratorSpec,
    pub n_samples: usize,
    pub seed: Option<u64>,
}

/// Everything a scenario file can carry.
#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub scenario: HighwayScenario,
    pub generator: Option<GeneratorConfig>,
    pub validation_horizon: Option<usize>,
    pub n_val: Option<usize>,
}

pub fn load_scenario(path: &Path) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::invalid(path.display().to_string(), e.to_string()))?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if raw.n != raw.segments.len() {
        return Err(Error::invalid(
            "n",
            format!("n = {} but {} segments are listed", raw.n, raw.segments.len()),
        ));
    }
    let segments = raw
        .segments
        .iter()
        .enumerate()
        .map(|(i, s)| {
            SegmentParams::new(
                s.f_bar,
                s.rho_bar,
                s.u_bar,
                s.f_incident.unwrap_or(s.f_bar),
                s.rho_incident.unwrap_or(s.rho_bar),
            )
            .map_err(|e| prefix(e, &format!("segments[{}]", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let scenario = HighwayScenario::new(ScenarioParams {
        length_km: raw.length_km,
        delta_s: raw.delta_s,
        horizon: raw.horizon,
        segments,
        gamma: raw.gamma,
        pi: raw.pi,
        eta_bar: raw.eta_bar,
        epsilon: raw.epsilon,
        beta: raw.beta,
    })?;
    let generator = raw
        .generator
        .map(|g| -> Result<GeneratorConfig> {
            if g.n_samples == 0 {
                return Err(Error::invalid("generator.n_samples", "must be at least 1"));
            }
            let spec = GeneratorSpec {
                rho0: expand(&g.rho0, raw.n, "generator.rho0")?,
                omega: expand(&g.omega, raw.n, "generator.omega")?,
            };
            spec.validate()?;
            Ok(GeneratorConfig {
                spec,
                n_samples: g.n_samples,
                seed: g.seed,
            })
        })
        .transpose()?;
    let (validation_horizon, n_val) = match raw.validation {
        Some(v) => {
            if v.horizon == Some(0) {
                return Err(Error::invalid("validation.T_val", "must be at least 1"));
            }
            if v.n_val == Some(0) {
                return Err(Error::invalid("validation.n_val", "must be at least 1"));
            }
            (v.horizon, v.n_val)
        }
        None => (None, None),
    };
    Ok(ScenarioFile {
        scenario,
        generator,
        validation_horizon,
        n_val,
    })
}

fn expand(b: &Bounds, n: usize, path: &str) -> Result<Vec<(f64, f64)>> {
    match b {
        Bounds::Scalar(v) => Ok(vec![(*v, *v); n]),
        Bounds::Range([lo, hi]) => Ok(vec![(*lo, *hi); n]),
        Bounds::PerEdge(v) if v.len() == n => Ok(v.iter().map(|[lo, hi]| (*lo, *hi)).collect()),
        Bounds::PerEdge(v) => Err(Error::invalid(
            path,
            format!("expected {n} per-edge bounds, found {}", v.len()),
        )),
    }
}

fn prefix(e: Error, at: &str) -> Error {
    match e {
        Error::InvalidInput { path, reason } => Error::InvalidInput {
            path: format!("{at}.{path}"),
            reason,
        },
        Error::DegenerateDiagram { .. } => Error::InvalidInput {
            path: at.to_string(),
            reason: e.to_string(),
        },
        other => other,
    }
}
