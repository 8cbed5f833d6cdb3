//! Machine-readable run reports.
//!
//! Every CLI command writes a `report.json` with the resolved scenario, the
//! list of produced files, and command-specific numeric results. Wall time is
//! printed to the console but kept out of the file so repeated runs with the
//! same config and seed produce byte-identical reports.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::scenario::ScenarioConfig;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub scenario: Value,
    pub outputs: Vec<String>,
    pub summary: Value,
    #[serde(skip)]
    pub wall_time: f64,
}

impl RunReport {
    pub fn new(command: &str, config: &ScenarioConfig) -> Self {
        Self {
            command: command.to_string(),
            scenario: scenario_echo(config),
            outputs: Vec::new(),
            summary: Value::Null,
            wall_time: 0.0,
        }
    }

    pub fn write_json<P: AsRef<Path>>(&self, path: P) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)
    }
}

fn scenario_echo(config: &ScenarioConfig) -> Value {
    json!({
        "lambda": config.params.lambda(),
        "mu": config.params.mu(),
        "nu": config.params.nu(),
        "stages": config.params.stages(),
        "overloaded": config.params.is_overloaded(),
        "initial_state": config.initial_state.as_slice(),
        "horizon": config.horizon,
        "grid_step": config.grid_step,
        "seed": config.seed,
        "replicas": config.replicas,
        "scale_r": config.scale_r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, StateVector};

    #[test]
    fn report_json_skips_wall_time() {
        let config = ScenarioConfig::new(
            ModelParams::new(2.0, vec![1.0], 1.0).unwrap(),
            StateVector::zeros(1),
            1.0,
            0.1,
            0,
            1,
            1.0,
        )
        .unwrap();
        let mut report = RunReport::new("invariant", &config);
        report.wall_time = 1.23;
        report.summary = json!({"norm": 1.0});
        let text = serde_json::to_string(&report).unwrap();
        assert!(!text.contains("wall_time"));
        assert!(text.contains("\"overloaded\":true"));
    }
}
