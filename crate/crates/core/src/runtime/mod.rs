//! The twin as a perpetual sequential loop.
//!
//! Each call to [`Twin::run_iteration`] drains queued operator commands,
//! fills the circuit forward to a fixpoint, exchanges states with the
//! physical side when a link is attached, evaluates the backflow equations
//! and finally records the new state word. Backflow warnings queue up and
//! are presented one at a time; in blocking mode the flagged variable only
//! switches on once the warning is acknowledged.

mod command;
mod config;
mod event;
mod scenario;
mod twin;

pub use command::{Command, CommandError};
pub use config::{AckMode, ConfigError, PauseMode, TwinConfig};
pub use event::{replay_history, Event, EventKind, Origin};
pub use scenario::{
    run_scenario, Expectation, PsScenario, Scenario, ScenarioCommand, ScenarioError, ScenarioOutcome, ScenarioStep, Special,
    WarningCheck,
};
pub use twin::{
    AnalogParam, BackflowWarning, IterationReport, StateChange, Twin, TwinError, TwinSnapshot, WarningKind,
    WarningState, Writer,
};
