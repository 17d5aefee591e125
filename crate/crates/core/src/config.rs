//! Experiment configuration files.
//!
//! A config is a JSON object. Flow and join specs may be given inline or as a
//! path to another JSON file (resolved relative to the config's directory).
//! Torus numerics are decimal strings or `{"p", "q"}` rationals; other reals
//! are decimal strings.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::diagnostics::Observable;
use crate::error::{Error, Result};
use crate::flows::{FlowSpec, Point};
use crate::joinings::JoinSpec;
use crate::lacunary::LacunaryParams;
use crate::nilflow::{HeisPoint, NilParams};
use crate::torus::{Frac, TorusPoint};

/// Largest orbit length accepted from a config.
pub const MAX_N: u64 = 1_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// A value given inline or as a path to a JSON file.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Inline<T> {
    Path(String),
    Value(T),
}

impl<T: DeserializeOwned> Inline<T> {
    fn resolve(self, base: &Path) -> Result<T> {
        match self {
            Inline::Value(v) => Ok(v),
            Inline::Path(p) => {
                let path = base.join(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            }
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    flow: Option<Inline<FlowSpec>>,
    join: Option<Inline<JoinSpec>>,
    observable: Option<Observable>,
    #[serde(rename = "N")]
    n: Option<u64>,
    start: Option<TorusPoint>,
    heis_start: Option<HeisPoint>,
    starts: Option<Vec<TorusPoint>>,
    thetas: Option<Vec<Frac>>,
    theta_grid: Option<u64>,
    threshold: Option<String>,
    grid: Option<u64>,
    checkpoints: Option<Vec<String>>,
    output: Option<PathBuf>,
    format: Option<Format>,
    lacunary: Option<LacunaryParams>,
    nil: Option<NilParams>,
    #[serde(rename = "K")]
    level: Option<usize>,
    alpha: Option<Frac>,
    beta: Option<Frac>,
    points: Option<u64>,
    seed: Option<u64>,
}

/// A parsed experiment configuration.
#[derive(Clone, Debug, Default)]
pub struct ExperimentConfig {
    pub flow: Option<FlowSpec>,
    pub join: Option<JoinSpec>,
    pub observable: Option<Observable>,
    pub n: Option<u64>,
    pub start: Option<Point>,
    pub starts: Option<Vec<TorusPoint>>,
    pub thetas: Option<Vec<Frac>>,
    pub threshold: Option<f64>,
    pub grid: Option<u64>,
    /// Checkpoint fractions in `(0, 1]`.
    pub checkpoints: Option<Vec<f64>>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub lacunary: Option<LacunaryParams>,
    pub nil: Option<NilParams>,
    pub level: Option<usize>,
    pub alpha: Option<Frac>,
    pub beta: Option<Frac>,
    pub points: Option<u64>,
    pub seed: Option<u64>,
}

fn parse_real(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Config(format!("malformed real `{s}`")))
}

impl ExperimentConfig {
    /// Parses a config from JSON text; relative paths resolve against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<ExperimentConfig> {
        let raw: RawConfig = serde_json::from_str(text)?;
        if raw.start.is_some() && raw.heis_start.is_some() {
            return Err(Error::Config("give either `start` or `heis_start`".into()));
        }
        if let Some(g) = raw.grid {
            if g == 0 {
                return Err(Error::Config("`grid` must be at least 1".into()));
            }
        }
        let thetas = match (raw.thetas, raw.theta_grid) {
            (Some(_), Some(_)) => return Err(Error::Config("give either `thetas` or `theta_grid`".into())),
            (Some(t), None) => Some(t),
            (None, Some(m)) => {
                if m == 0 || m > 1_000_000 {
                    return Err(Error::Config("`theta_grid` must lie in 1..=1000000".into()));
                }
                Some((0..m).map(|k| Frac::from_rational(k as i128, m as i128)).collect::<Result<_>>()?)
            }
            (None, None) => None,
        };
        let checkpoints = match raw.checkpoints {
            None => None,
            Some(list) => {
                let v = list.iter().map(|s| parse_real(s)).collect::<Result<Vec<f64>>>()?;
                if v.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
                    return Err(Error::Config("checkpoint fractions must lie in (0, 1]".into()));
                }
                Some(v)
            }
        };
        Ok(ExperimentConfig {
            flow: raw.flow.map(|f| f.resolve(base)).transpose()?,
            join: raw.join.map(|j| j.resolve(base)).transpose()?,
            observable: raw.observable,
            n: raw.n,
            start: raw.start.map(Point::Torus).or(raw.heis_start.map(Point::Heis)),
            starts: raw.starts,
            thetas,
            threshold: raw.threshold.as_deref().map(parse_real).transpose()?,
            grid: raw.grid,
            checkpoints,
            output: raw.output,
            format: raw.format,
            lacunary: raw.lacunary,
            nil: raw.nil,
            level: raw.level,
            alpha: raw.alpha,
            beta: raw.beta,
            points: raw.points,
            seed: raw.seed,
        })
    }

    /// Reads and parses a config file.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        ExperimentConfig::from_json(&text, base)
    }

    pub fn flow(&self) -> Result<&FlowSpec> {
        self.flow.as_ref().ok_or_else(|| Error::Config("missing `flow`".into()))
    }

    pub fn observable(&self) -> Result<&Observable> {
        self.observable.as_ref().ok_or_else(|| Error::Config("missing `observable`".into()))
    }

    /// Sample length: command-line override, then config, then `default`.
    pub fn n_or(&self, cli: Option<u64>, default: u64) -> Result<u64> {
        let n = cli.or(self.n).unwrap_or(default);
        if n == 0 {
            return Err(Error::Config("N must be at least 1".into()));
        }
        if n > MAX_N {
            return Err(Error::ResourceLimit(format!("N = {n} exceeds {MAX_N}")));
        }
        Ok(n)
    }

    /// The configured start, defaulting to the origin (or the identity coset).
    pub fn start_for(&self, spec: &FlowSpec) -> Point {
        match (&self.start, spec) {
            (Some(p), _) => p.clone(),
            (None, FlowSpec::Heisenberg(_)) => Point::Heis(HeisPoint::IDENTITY),
            (None, _) => Point::Torus(TorusPoint::zeros(spec.dim())),
        }
    }
}
