//! TOML run configuration: system matrices, control bounds, problem setup,
//! and solver invocation defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use tbt::encoder::{EnforceMode, DEFAULT_EPSILON};
use tbt::milp::DEFAULT_TOL_INT;
use tbt::parser;
use tbt::synthesis::{ControlBounds, LinearSystem, SynthesisProblem};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("{path}: {source}")]
    Spec {
        path: PathBuf,
        source: tbt::parser::ParseError,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub system: RawSystem,
    pub control: RawControl,
    pub problem: RawProblem,
    #[serde(default)]
    pub solver: RawSolver,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSystem {
    pub n: usize,
    pub m: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub dt: f64,
    pub state_box: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawControl {
    pub bounds: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProblem {
    pub x0: Vec<f64>,
    pub horizon: usize,
    pub r: Vec<f64>,
    /// "final" or "any".
    #[serde(default = "default_enforce")]
    pub enforce: String,
    /// Path to a .tbt spec file, relative to the config file.
    pub spec: Option<PathBuf>,
    /// Inline spec text; mutually exclusive with `spec`.
    pub spec_text: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSolver {
    pub command: Option<String>,
    pub time_limit: Option<f64>,
    pub tol_int: Option<f64>,
    pub epsilon: Option<f64>,
}

fn default_enforce() -> String {
    "final".into()
}

pub struct LoadedConfig {
    pub problem: SynthesisProblem,
    pub solver_command: Option<String>,
    pub time_limit: Option<f64>,
    pub tol_int: f64,
}

pub fn parse_enforce(s: &str) -> Result<EnforceMode, ConfigError> {
    match s {
        "final" => Ok(EnforceMode::AtFinal),
        "any" => Ok(EnforceMode::AnyHorizon),
        other => Err(ConfigError::Invalid(format!(
            "enforce must be \"final\" or \"any\", got {other:?}"
        ))),
    }
}

pub fn load(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let raw: RawConfig = toml::from_str(&text).map_err(|source| ConfigError::Toml {
        path: path.to_path_buf(),
        source,
    })?;
    let spec_text = match (&raw.problem.spec, &raw.problem.spec_text) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid(
                "problem.spec and problem.spec_text are mutually exclusive".into(),
            ))
        }
        (None, None) => {
            return Err(ConfigError::Invalid(
                "one of problem.spec or problem.spec_text is required".into(),
            ))
        }
        (Some(rel), None) => {
            let spec_path = path.parent().unwrap_or(Path::new(".")).join(rel);
            std::fs::read_to_string(&spec_path).map_err(|source| ConfigError::Io {
                path: spec_path.clone(),
                source,
            })?
        }
        (None, Some(text)) => text.clone(),
    };
    let spec = parser::parse_spec(&spec_text, raw.system.n).map_err(|source| {
        ConfigError::Spec {
            path: raw
                .problem
                .spec
                .clone()
                .unwrap_or_else(|| path.to_path_buf()),
            source,
        }
    })?;
    let enforce = parse_enforce(&raw.problem.enforce)?;
    let system = LinearSystem {
        n: raw.system.n,
        m: raw.system.m,
        a: raw.system.a,
        b: raw.system.b,
        dt: raw.system.dt,
        state_box: raw.system.state_box.iter().map(|b| (b[0], b[1])).collect(),
    };
    let bounds = ControlBounds {
        bounds: raw.control.bounds.iter().map(|b| (b[0], b[1])).collect(),
    };
    if raw.problem.r.len() != system.m {
        return Err(ConfigError::Invalid(format!(
            "problem.r must have m = {} entries, got {}",
            system.m,
            raw.problem.r.len()
        )));
    }
    Ok(LoadedConfig {
        problem: SynthesisProblem {
            system,
            bounds,
            x0: raw.problem.x0,
            spec,
            horizon: raw.problem.horizon,
            r: raw.problem.r,
            enforce,
            epsilon: raw.solver.epsilon.unwrap_or(DEFAULT_EPSILON),
        },
        solver_command: raw.solver.command,
        time_limit: raw.solver.time_limit,
        tol_int: raw.solver.tol_int.unwrap_or(DEFAULT_TOL_INT),
    })
}
