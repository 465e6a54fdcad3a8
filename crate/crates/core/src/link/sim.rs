use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, MutexGuard};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Actuate, LinkError, PhysicalLink, SensorFrame};
use crate::circuit::{CircuitGraph, DeviceKind, Edge, Role};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Pressure (or voltage) of an open source.
    pub supply: f64,
    /// Half-width of the uniform reading noise.
    pub noise: f64,
    /// Fraction of pressure lost per step by a leaking section.
    pub leak_rate: f64,
    pub seed: u64,
    /// Variables reported in frames: segments give pressure, devices give
    /// their position (1 open, 0 shut).
    pub sensors: Vec<String>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            supply: 1.0,
            noise: 0.002,
            leak_rate: 0.5,
            seed: 0,
            sensors: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    Leak,
    Blockage,
    StuckActuator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub target: String,
    /// First simulator step at which the fault acts.
    #[serde(default)]
    pub onset_iteration: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("a leak needs a segment, `{0}` is not one")]
    LeakTarget(String),
    #[error("{0:?} needs a device, `{1}` is not one")]
    DeviceTarget(FaultKind, String),
    #[error("unknown sensor `{0}`")]
    UnknownSensor(String),
}

/// Equilibrium model of the physical circuit. Pressure spreads from open
/// sources through passable edges and stays trapped when valves close.
#[derive(Debug, Clone)]
pub struct PsSim {
    graph: CircuitGraph,
    config: SimConfig,
    pressure: BTreeMap<String, f64>,
    commanded: BTreeMap<String, bool>,
    stuck: BTreeMap<String, bool>,
    params: BTreeMap<String, f64>,
    faults: Vec<FaultSpec>,
    step: u64,
    rng: ChaCha8Rng,
}

impl PsSim {
    pub fn new(graph: CircuitGraph, config: SimConfig) -> Result<Self, SimError> {
        for s in &config.sensors {
            if graph.segment(s).is_none() && graph.device(s).is_none() {
                return Err(SimError::UnknownSensor(s.clone()));
            }
        }
        let pressure = graph.segments.iter().map(|s| (s.id.clone(), 0.0)).collect();
        let params = graph.params.iter().map(|p| (p.id.clone(), p.default)).collect();
        Ok(PsSim {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            graph,
            config,
            pressure,
            commanded: BTreeMap::new(),
            stuck: BTreeMap::new(),
            params,
            faults: Vec::new(),
            step: 0,
        })
    }

    pub fn inject(&mut self, fault: FaultSpec) -> Result<(), SimError> {
        match fault.kind {
            FaultKind::Leak if self.graph.segment(&fault.target).is_none() => {
                return Err(SimError::LeakTarget(fault.target));
            }
            FaultKind::Blockage | FaultKind::StuckActuator if self.graph.device(&fault.target).is_none() => {
                return Err(SimError::DeviceTarget(fault.kind, fault.target));
            }
            _ => {}
        }
        self.faults.push(fault);
        Ok(())
    }

    pub fn apply(&mut self, msg: &Actuate) {
        for (id, v) in &msg.states {
            self.commanded.insert(id.clone(), *v);
        }
        for (id, v) in &msg.params {
            self.params.insert(id.clone(), *v);
        }
    }

    /// Change a parameter from the physical side, as a front panel would.
    pub fn set_physical_param(&mut self, id: &str, value: f64) {
        self.params.insert(id.to_owned(), value);
    }

    pub fn pressure(&self, segment: &str) -> Option<f64> {
        self.pressure.get(segment).copied()
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    fn active(&self, kind: FaultKind, target: &str) -> Option<&FaultSpec> {
        self.faults
            .iter()
            .find(|f| f.kind == kind && f.target == target && f.onset_iteration <= self.step)
    }

    fn is_open(&self, device: &str) -> bool {
        let Some(dev) = self.graph.device(device) else { return false };
        if let Some(&pos) = self.stuck.get(device) {
            return pos;
        }
        match dev.kind {
            DeviceKind::CheckValve => true,
            DeviceKind::ManualValve if dev.transparent => true,
            DeviceKind::ManualValve => self.commanded.get(device).copied().unwrap_or(false),
            DeviceKind::Actuator => match &dev.follows {
                Some(seg) => self.pressure.get(seg).copied().unwrap_or(0.0) > self.config.supply / 2.0,
                None => self.commanded.get(device).copied().unwrap_or(false),
            },
        }
    }

    fn passable(&self, edge: &Edge, from: &str, to: &str) -> bool {
        edge.devices.iter().all(|id| {
            if self.active(FaultKind::Blockage, id).is_some() || !self.is_open(id) {
                return false;
            }
            match self.graph.device(id).and_then(|d| d.allowed_direction.as_ref()) {
                Some((a, b)) => a == from && b == to,
                None => true,
            }
        })
    }

    /// Advance one step and report the instrumented variables.
    pub fn step(&mut self) -> SensorFrame {
        let stuck_now: Vec<String> = self
            .faults
            .iter()
            .filter(|f| f.kind == FaultKind::StuckActuator && f.onset_iteration <= self.step)
            .map(|f| f.target.clone())
            .filter(|t| !self.stuck.contains_key(t))
            .collect();
        for t in stuck_now {
            let pos = self.is_open(&t);
            self.stuck.insert(t, pos);
        }

        let mut p = self.pressure.clone();
        for s in self.graph.segments_with_role(Role::Input) {
            let on = self.commanded.get(&s.id).copied().unwrap_or(false);
            p.insert(s.id.clone(), if on { self.config.supply } else { 0.0 });
        }
        let mut moved = true;
        while moved {
            moved = false;
            for edge in &self.graph.edges {
                for (a, b) in [(&edge.from, &edge.to), (&edge.to, &edge.from)] {
                    if p[a] > p[b] && self.passable(edge, a, b) {
                        let v = p[a];
                        p.insert(b.clone(), v);
                        moved = true;
                    }
                }
            }
        }
        for f in &self.faults {
            if f.kind == FaultKind::Leak && f.onset_iteration <= self.step {
                let k = (self.step - f.onset_iteration + 1) as i32;
                if let Some(v) = p.get_mut(&f.target) {
                    *v *= (1.0 - self.config.leak_rate).powi(k);
                }
            }
        }
        self.pressure = p;

        let mut readings = BTreeMap::new();
        for id in self.config.sensors.clone() {
            let base = match self.pressure.get(&id) {
                Some(v) => *v,
                None if self.is_open(&id) => 1.0,
                None => 0.0,
            };
            let noise = if self.config.noise > 0.0 {
                self.rng.random_range(-self.config.noise..=self.config.noise)
            } else {
                0.0
            };
            readings.insert(id, base + noise);
        }
        let frame = SensorFrame {
            readings,
            params: self.params.clone(),
            ts: self.step,
        };
        self.step += 1;
        frame
    }
}

/// In-process link to a shared [`PsSim`]. Clones share the same simulator.
#[derive(Debug, Clone)]
pub struct SimLink {
    sim: Arc<Mutex<PsSim>>,
    pushes: Arc<Mutex<usize>>,
}

impl SimLink {
    pub fn new(sim: PsSim) -> Self {
        SimLink {
            sim: Arc::new(Mutex::new(sim)),
            pushes: Arc::new(Mutex::new(0)),
        }
    }

    pub fn sim(&self) -> MutexGuard<'_, PsSim> {
        self.sim.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Messages received so far.
    pub fn pushes(&self) -> usize {
        *self.pushes.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl PhysicalLink for SimLink {
    fn push(&mut self, msg: &Actuate) -> Result<(), LinkError> {
        *self.pushes.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.sim().apply(msg);
        Ok(())
    }

    fn poll(&mut self) -> Result<Option<SensorFrame>, LinkError> {
        Ok(Some(self.sim().step()))
    }
}
