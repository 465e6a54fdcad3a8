use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::CircuitGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PauseMode {
    /// Sleep for real.
    #[default]
    Live,
    /// No pause at all.
    Skip,
    /// Advance a virtual clock, for reproducible replays.
    Virtual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AckMode {
    /// Backflow assignments wait for the operator.
    #[default]
    Blocking,
    /// Backflow assignments happen at once and warnings are acknowledged
    /// automatically.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwinConfig {
    /// Pause between pushing states and reading sensors, when a link is
    /// attached.
    pub pause_ms: u64,
    pub pause_mode: PauseMode,
    pub ack_mode: AckMode,
    /// Iterations between consumption resets of sensor-less outputs and
    /// internal variables. 0 disables the reset.
    pub decay_interval: u64,
    /// Variables (segments or devices) with a physical sensor.
    pub sensors: Vec<String>,
    /// Per-variable binarization thresholds.
    pub thresholds: BTreeMap<String, f64>,
    pub default_threshold: f64,
}

impl Default for TwinConfig {
    fn default() -> Self {
        TwinConfig {
            pause_ms: 100,
            pause_mode: PauseMode::Live,
            ack_mode: AckMode::Blocking,
            decay_interval: 20,
            sensors: Vec::new(),
            thresholds: BTreeMap::new(),
            default_threshold: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("sensor on unknown variable `{0}`")]
    UnknownSensor(String),
    #[error("threshold for `{0}`, which has no sensor")]
    ThresholdWithoutSensor(String),
    #[error("threshold must be positive and finite, got {0}")]
    BadThreshold(f64),
}

impl TwinConfig {
    pub fn threshold(&self, var: &str) -> f64 {
        self.thresholds.get(var).copied().unwrap_or(self.default_threshold)
    }

    pub fn has_sensor(&self, var: &str) -> bool {
        self.sensors.iter().any(|s| s == var)
    }

    pub fn check(&self, graph: &CircuitGraph) -> Result<(), ConfigError> {
        for s in &self.sensors {
            if graph.segment(s).is_none() && graph.device(s).is_none() {
                return Err(ConfigError::UnknownSensor(s.clone()));
            }
        }
        for (var, t) in &self.thresholds {
            if !self.has_sensor(var) {
                return Err(ConfigError::ThresholdWithoutSensor(var.clone()));
            }
            if !(t.is_finite() && *t > 0.0) {
                return Err(ConfigError::BadThreshold(*t));
            }
        }
        if !(self.default_threshold.is_finite() && self.default_threshold > 0.0) {
            return Err(ConfigError::BadThreshold(self.default_threshold));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::circuit::{normalize, parse_netlist};

    #[test]
    fn defaults_and_partial_json() {
        let c: TwinConfig = serde_json::from_str(r#"{"ack_mode":"auto","sensors":["S1"]}"#).unwrap();
        assert_eq!(c.pause_ms, 100);
        assert_eq!(c.decay_interval, 20);
        assert_eq!(c.ack_mode, AckMode::Auto);
        assert_eq!(c.threshold("S1"), 0.05);
    }

    #[test]
    fn unknown_names_are_rejected() {
        let g = normalize(parse_netlist(bundled::CIRCUIT1).unwrap()).unwrap();
        let c = TwinConfig {
            sensors: vec!["S9".into()],
            ..TwinConfig::default()
        };
        assert_eq!(c.check(&g), Err(ConfigError::UnknownSensor("S9".into())));
        let c = TwinConfig {
            sensors: vec!["S1".into(), "E2".into()],
            thresholds: BTreeMap::from([("S2".into(), 0.1)]),
            ..TwinConfig::default()
        };
        assert_eq!(c.check(&g), Err(ConfigError::ThresholdWithoutSensor("S2".into())));
        let c = TwinConfig {
            sensors: vec!["S1".into()],
            thresholds: BTreeMap::from([("S1".into(), -1.0)]),
            ..TwinConfig::default()
        };
        assert_eq!(c.check(&g), Err(ConfigError::BadThreshold(-1.0)));
    }
}
