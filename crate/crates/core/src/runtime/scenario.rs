use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::command::Command;
use super::config::{AckMode, PauseMode, TwinConfig};
use super::event::Event;
use super::twin::{IterationReport, Twin, TwinError, TwinSnapshot, WarningKind, WarningState};
use crate::circuit::CircuitGraph;
use crate::link::{FaultSpec, PsSim, SimConfig, SimError, SimLink};
use crate::logic::EquationSet;

/// Scripted run of a twin, optionally closed over the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub config: Option<TwinConfig>,
    #[serde(default)]
    pub ps: Option<PsScenario>,
    pub iterations: u64,
    #[serde(default)]
    pub steps: Vec<ScenarioStep>,
    #[serde(default)]
    pub expect: Vec<Expectation>,
}

/// Simulated physical side. Sensors are the twin's sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsScenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: Option<f64>,
    #[serde(default)]
    pub leak_rate: Option<f64>,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStep {
    pub at_iteration: u64,
    pub command: ScenarioCommand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioCommand {
    Command(Command),
    Special(Special),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Special {
    /// Acknowledge whichever warning is presented.
    AckCurrent,
}

/// Checked after running `at_iteration`, and after every iteration up to
/// `until_iteration` when given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub at_iteration: u64,
    #[serde(default)]
    pub until_iteration: Option<u64>,
    #[serde(default)]
    pub variable: Option<String>,
    #[serde(default)]
    pub value: Option<bool>,
    #[serde(default)]
    pub warning: Option<WarningCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarningCheck {
    pub target: String,
    #[serde(default)]
    pub kind: Option<WarningKind>,
    /// `false` asserts that no such warning was ever raised.
    #[serde(default = "yes")]
    pub raised: bool,
    #[serde(default)]
    pub pending: Option<bool>,
    /// Whether it is the warning presented to the operator.
    #[serde(default)]
    pub head: Option<bool>,
    /// A term that must be among the satisfied source terms.
    #[serde(default)]
    pub source: Option<String>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Twin(#[from] TwinError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("iteration {at}: command rejected: {source}")]
    Command { at: u64, source: TwinError },
    #[error("step at iteration {0} is past the end of the scenario")]
    OutOfRange(u64),
    #[error("iteration {at}: {message}")]
    Unmet { at: u64, message: String },
}

#[derive(Debug)]
pub struct ScenarioOutcome {
    pub reports: Vec<IterationReport>,
    pub events: Vec<Event>,
    pub snapshot: TwinSnapshot,
}

fn check(twin: &Twin, e: &Expectation, at: u64) -> Result<(), ScenarioError> {
    let unmet = |message: String| ScenarioError::Unmet { at, message };
    if let Some(var) = &e.variable {
        let want = e.value.unwrap_or(true);
        match twin.value(var) {
            Some(v) if v == want => {}
            Some(v) => return Err(unmet(format!("{var} is {}, expected {}", v as u8, want as u8))),
            None => return Err(unmet(format!("unknown variable {var}"))),
        }
    }
    if let Some(w) = &e.warning {
        let matching: Vec<_> = twin
            .warnings()
            .iter()
            .filter(|x| x.target == w.target && w.kind.is_none_or(|k| k == x.kind))
            .collect();
        if !w.raised {
            if let Some(x) = matching.first() {
                return Err(unmet(format!("warning on {} raised at iteration {}", w.target, x.raised_at)));
            }
            return Ok(());
        }
        let Some(x) = matching.last() else {
            return Err(unmet(format!("no warning on {}", w.target)));
        };
        if let Some(p) = w.pending {
            if (x.state == WarningState::Pending) != p {
                return Err(unmet(format!("warning on {} is {:?}", w.target, x.state)));
            }
        }
        if let Some(h) = w.head {
            if (twin.head().map(|hd| hd.id) == Some(x.id)) != h {
                return Err(unmet(format!("warning on {} presented: {}, expected {h}", w.target, !h)));
            }
        }
        if let Some(src) = &w.source {
            if !x.source_terms.contains(src) {
                return Err(unmet(format!(
                    "warning on {} comes from {:?}, not {src}",
                    w.target, x.source_terms
                )));
            }
        }
    }
    Ok(())
}

/// Run a scenario to the end, failing on the first unmet expectation.
/// Pauses use the virtual clock; `auto_ack` forces automatic
/// acknowledgment.
pub fn run_scenario(
    graph: &CircuitGraph,
    eqs: &EquationSet,
    scenario: &Scenario,
    auto_ack: bool,
) -> Result<ScenarioOutcome, ScenarioError> {
    if let Some(s) = scenario.steps.iter().find(|s| s.at_iteration >= scenario.iterations) {
        return Err(ScenarioError::OutOfRange(s.at_iteration));
    }
    let mut config = scenario.config.clone().unwrap_or_default();
    config.pause_mode = PauseMode::Virtual;
    if auto_ack {
        config.ack_mode = AckMode::Auto;
    }
    let mut twin = Twin::new(graph.clone(), eqs.clone(), config.clone())?;
    if let Some(ps) = &scenario.ps {
        let defaults = SimConfig::default();
        let mut sim = PsSim::new(
            graph.clone(),
            SimConfig {
                seed: ps.seed,
                noise: ps.noise.unwrap_or(defaults.noise),
                leak_rate: ps.leak_rate.unwrap_or(defaults.leak_rate),
                sensors: config.sensors.clone(),
                ..defaults
            },
        )?;
        for f in &ps.faults {
            sim.inject(f.clone())?;
        }
        twin.attach_link(Box::new(SimLink::new(sim)))?;
    }

    let mut reports = Vec::new();
    let mut events = Vec::new();
    for at in 0..scenario.iterations {
        for step in scenario.steps.iter().filter(|s| s.at_iteration == at) {
            let result = match &step.command {
                ScenarioCommand::Command(cmd) => twin.submit(cmd.clone()),
                ScenarioCommand::Special(Special::AckCurrent) => twin.ack_head(),
            };
            result.map_err(|source| ScenarioError::Command { at, source })?;
        }
        reports.push(twin.run_iteration()?);
        events.extend(twin.drain_events());
        for e in &scenario.expect {
            if e.at_iteration <= at && at <= e.until_iteration.unwrap_or(e.at_iteration) {
                check(&twin, e, at)?;
            }
        }
    }
    Ok(ScenarioOutcome {
        reports,
        events,
        snapshot: twin.snapshot(),
    })
}
