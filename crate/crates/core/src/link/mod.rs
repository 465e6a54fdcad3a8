//! Exchange with the physical side: actuator and input states go out,
//! analog sensor frames come back and are binarized by threshold.

mod sim;
mod stream;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use sim::{FaultKind, FaultSpec, PsSim, SimConfig, SimError, SimLink};
pub use stream::{SharedLink, StreamLink};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BinarizeError {
    #[error("reading {0} is not a finite number")]
    NonFinite(f64),
    #[error("threshold must be positive, got {0}")]
    BadThreshold(f64),
}

/// A deviation from ambient counts as present when its magnitude is
/// strictly above `threshold`. Depressions count too.
pub fn binarize(reading: f64, threshold: f64) -> Result<bool, BinarizeError> {
    if threshold.is_nan() || threshold <= 0.0 || threshold.is_infinite() {
        return Err(BinarizeError::BadThreshold(threshold));
    }
    if !reading.is_finite() {
        return Err(BinarizeError::NonFinite(reading));
    }
    Ok(reading.abs() > threshold)
}

/// Outbound message: states of inputs and actuators, analog parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Actuate {
    pub states: BTreeMap<String, bool>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// Inbound message: analog readings of the instrumented variables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub readings: BTreeMap<String, f64>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub ts: u64,
}

/// Line of the wire protocol, tagged by `type`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireMessage {
    Actuate(Actuate),
    Frame(SensorFrame),
}

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("link i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed message: {0}")]
    Protocol(String),
    #[error("link closed")]
    Closed,
}

/// Physical side of the twin, real or simulated.
pub trait PhysicalLink: Send {
    fn push(&mut self, msg: &Actuate) -> Result<(), LinkError>;

    /// Latest frame, if one is available.
    fn poll(&mut self) -> Result<Option<SensorFrame>, LinkError>;
}

impl<L: PhysicalLink + ?Sized> PhysicalLink for Box<L> {
    fn push(&mut self, msg: &Actuate) -> Result<(), LinkError> {
        (**self).push(msg)
    }

    fn poll(&mut self) -> Result<Option<SensorFrame>, LinkError> {
        (**self).poll()
    }
}
