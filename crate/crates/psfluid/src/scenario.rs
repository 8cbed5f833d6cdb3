//! Scenario configuration: a flat `key=value` text format and its validation.
//!
//! Lines are UTF-8, one `key = value` pair per line; `#` starts a comment
//! (full-line or trailing). Unknown and duplicate keys are errors. Lists are
//! comma-separated. Required keys: `lambda`, `mu`, `nu`. The rest default to:
//! `initial_state` all zeros, `horizon` 10, `grid_step` 0.001, `seed` 0,
//! `replicas` 1, `scale_r` 1.
//!
//! Routed-model probes read the optional keys `lambda_vec`, `nu_vec`,
//! `routing` (matrix rows separated by `;`), `q1`, `q2`, `samples`,
//! `region_lo`, `region_hi`.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::model::{ModelError, ModelParams, StateVector};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("line {line}: expected `key = value`")]
    MalformedLine { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("key `{key}`: {message}")]
    InvalidValue { key: String, message: String },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

/// Optional inputs for the routed-model Lyapunov probes. When absent, the
/// probes fall back to the tandem embedding of the scenario's `ModelParams`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LyapunovOptions {
    pub lambda_vec: Option<Vec<f64>>,
    pub nu_vec: Option<Vec<f64>>,
    pub routing: Option<Vec<Vec<f64>>>,
    pub q: Option<(f64, f64)>,
    pub samples: Option<usize>,
    pub region_lo: Option<Vec<f64>>,
    pub region_hi: Option<Vec<f64>>,
}

/// A fully resolved scenario: model parameters plus run controls.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: ModelParams,
    pub initial_state: StateVector,
    /// End time of the run.
    pub horizon: f64,
    /// Output grid spacing.
    pub grid_step: f64,
    pub seed: u64,
    pub replicas: usize,
    /// Fluid scaling parameter `r`.
    pub scale_r: f64,
    pub lyapunov: LyapunovOptions,
}

impl ScenarioConfig {
    pub fn new(
        params: ModelParams,
        initial_state: StateVector,
        horizon: f64,
        grid_step: f64,
        seed: u64,
        replicas: usize,
        scale_r: f64,
    ) -> Result<Self, ConfigError> {
        let config = Self {
            params,
            initial_state,
            horizon,
            grid_step,
            seed,
            replicas,
            scale_r,
            lyapunov: LyapunovOptions::default(),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.initial_state.len() != self.params.stages() {
            return Err(ConfigError::InvalidScenario(format!(
                "initial_state has {} coordinates but there are {} stages",
                self.initial_state.len(),
                self.params.stages()
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(ConfigError::InvalidScenario(
                "horizon must be positive".into(),
            ));
        }
        if !(self.grid_step > 0.0 && self.grid_step.is_finite()) {
            return Err(ConfigError::InvalidScenario(
                "grid_step must be positive".into(),
            ));
        }
        if self.grid_step > self.horizon {
            return Err(ConfigError::InvalidScenario(
                "grid_step must not exceed horizon".into(),
            ));
        }
        if self.replicas == 0 {
            return Err(ConfigError::InvalidScenario(
                "replicas must be at least 1".into(),
            ));
        }
        if !(self.scale_r > 0.0 && self.scale_r.is_finite()) {
            return Err(ConfigError::InvalidScenario(
                "scale_r must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self, ConfigError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut lambda = None;
        let mut mu: Option<Vec<f64>> = None;
        let mut nu = None;
        let mut initial_state: Option<Vec<f64>> = None;
        let mut horizon = None;
        let mut grid_step = None;
        let mut seed = None;
        let mut replicas = None;
        let mut scale_r = None;
        let mut lyap = LyapunovOptions::default();
        let mut q1 = None;
        let mut q2 = None;

        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::MalformedLine { line: line_no })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey {
                    line: line_no,
                    key: key.into(),
                });
            }
            match key {
                "lambda" => lambda = Some(parse_f64(key, value)?),
                "mu" => mu = Some(parse_list(key, value)?),
                "nu" => nu = Some(parse_f64(key, value)?),
                "initial_state" => initial_state = Some(parse_list(key, value)?),
                "horizon" => horizon = Some(parse_f64(key, value)?),
                "grid_step" => grid_step = Some(parse_f64(key, value)?),
                "seed" => seed = Some(parse_u64(key, value)?),
                "replicas" => replicas = Some(parse_usize(key, value)?),
                "scale_r" => scale_r = Some(parse_f64(key, value)?),
                "lambda_vec" => lyap.lambda_vec = Some(parse_list(key, value)?),
                "nu_vec" => lyap.nu_vec = Some(parse_list(key, value)?),
                "routing" => lyap.routing = Some(parse_matrix(key, value)?),
                "q1" => q1 = Some(parse_f64(key, value)?),
                "q2" => q2 = Some(parse_f64(key, value)?),
                "samples" => lyap.samples = Some(parse_usize(key, value)?),
                "region_lo" => lyap.region_lo = Some(parse_list(key, value)?),
                "region_hi" => lyap.region_hi = Some(parse_list(key, value)?),
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line: line_no,
                        key: key.into(),
                    })
                }
            }
        }

        match (q1, q2) {
            (Some(a), Some(b)) => lyap.q = Some((a, b)),
            (None, None) => {}
            _ => {
                return Err(ConfigError::InvalidScenario(
                    "q1 and q2 must be given together".into(),
                ))
            }
        }

        let params = ModelParams::new(
            lambda.ok_or(ConfigError::MissingKey("lambda"))?,
            mu.ok_or(ConfigError::MissingKey("mu"))?,
            nu.ok_or(ConfigError::MissingKey("nu"))?,
        )?;
        let initial_state = match initial_state {
            Some(values) => StateVector::new(values)?,
            None => StateVector::zeros(params.stages()),
        };
        let mut config = Self::new(
            params,
            initial_state,
            horizon.unwrap_or(10.0),
            grid_step.unwrap_or(1e-3),
            seed.unwrap_or(0),
            replicas.unwrap_or(1),
            scale_r.unwrap_or(1.0),
        )?;
        config.lyapunov = lyap;
        Ok(config)
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse().map_err(|_| ConfigError::InvalidValue {
        key: key.into(),
        message: format!("`{value}` is not a number"),
    })
}

fn parse_u64(key: &str, value: &str) -> Result<u64, ConfigError> {
    value.parse().map_err(|_| ConfigError::InvalidValue {
        key: key.into(),
        message: format!("`{value}` is not an unsigned integer"),
    })
}

fn parse_usize(key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse().map_err(|_| ConfigError::InvalidValue {
        key: key.into(),
        message: format!("`{value}` is not an unsigned integer"),
    })
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|part| parse_f64(key, part.trim()))
        .collect()
}

fn parse_matrix(key: &str, value: &str) -> Result<Vec<Vec<f64>>, ConfigError> {
    value
        .split(';')
        .map(|row| parse_list(key, row.trim()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "\
# two-stage scenario
lambda = 2.0
mu = 1.0, 1.0
nu = 1.0
horizon = 5.0
grid_step = 0.05
seed = 7
";

    #[test]
    fn parses_basic_config() {
        let config = ScenarioConfig::parse(BASIC).unwrap();
        assert_eq!(config.params.lambda(), 2.0);
        assert_eq!(config.params.mu(), &[1.0, 1.0]);
        assert_eq!(config.seed, 7);
        assert_eq!(config.replicas, 1);
        assert_eq!(config.initial_state, StateVector::zeros(2));
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = ScenarioConfig::parse("lambda=1\nmu=1\nnu=1\nbogus=3\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { key, .. } if key == "bogus"));
    }

    #[test]
    fn duplicate_key_is_an_error() {
        let err = ScenarioConfig::parse("lambda=1\nlambda=2\nmu=1\nnu=1\n").unwrap_err();
        assert!(matches!(err, ConfigError::DuplicateKey { key, .. } if key == "lambda"));
    }

    #[test]
    fn missing_required_key() {
        let err = ScenarioConfig::parse("lambda=1\nmu=1\n").unwrap_err();
        assert!(matches!(err, ConfigError::MissingKey("nu")));
    }

    #[test]
    fn trailing_comment_and_whitespace() {
        let config =
            ScenarioConfig::parse("lambda = 1 # arrivals\n  mu=0.5,0.5  \nnu=2\n").unwrap();
        assert_eq!(config.params.mu(), &[0.5, 0.5]);
    }

    #[test]
    fn grid_step_must_not_exceed_horizon() {
        let err =
            ScenarioConfig::parse("lambda=1\nmu=1\nnu=1\nhorizon=1\ngrid_step=2\n").unwrap_err();
        assert!(matches!(err, ConfigError::InvalidScenario(_)));
    }

    #[test]
    fn initial_state_dimension_checked() {
        let err = ScenarioConfig::parse("lambda=1\nmu=1,1\nnu=1\ninitial_state=1\n").unwrap_err();
        assert!(matches!(err, ConfigError::InvalidScenario(_)));
    }

    #[test]
    fn routing_matrix_and_weights() {
        let text = "lambda=1\nmu=1,2\nnu=1\nrouting=0,1;0,0\nq1=0.5\nq2=0.25\n";
        let config = ScenarioConfig::parse(text).unwrap();
        assert_eq!(
            config.lyapunov.routing,
            Some(vec![vec![0.0, 1.0], vec![0.0, 0.0]])
        );
        assert_eq!(config.lyapunov.q, Some((0.5, 0.25)));
    }

    #[test]
    fn q_weights_must_come_in_pairs() {
        let err = ScenarioConfig::parse("lambda=1\nmu=1\nnu=1\nq1=0.5\n").unwrap_err();
        assert!(matches!(err, ConfigError::InvalidScenario(_)));
    }
}
