use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::command::{Command, CommandError};
use super::config::{AckMode, ConfigError, PauseMode, TwinConfig};
use super::event::{Event, EventKind, Origin};
use crate::circuit::{CircuitGraph, Role, VarClass, Variable};
use crate::diagnosis::{classify_mismatch, HistoryDb, HistoryError, Label, MismatchReport, Observation, StateWord};
use crate::link::{binarize, Actuate, PhysicalLink};
use crate::logic::{detect_backflows, forward_fixpoint, EquationSet, EvalError, State, Step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    IvBackflow,
    InputBackflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningState {
    Pending,
    Acknowledged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackflowWarning {
    pub id: u64,
    pub target: String,
    pub kind: WarningKind,
    /// Satisfied terms of the backflow equation, e.g. `E4.H1p`.
    pub source_terms: Vec<String>,
    pub raised_at: u64,
    pub state: WarningState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Writer {
    Virtual,
    Physical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalogParam {
    pub id: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    pub last_writer: Writer,
    pub last_write_iteration: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateChange {
    pub var: String,
    pub from: bool,
    pub to: bool,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationReport {
    pub iteration: u64,
    /// Passes of the forward fixpoint, the confirming one included.
    pub passes: usize,
    pub converged: bool,
    /// Every assignment in order, with the phase that made it.
    pub changes: Vec<StateChange>,
    /// Ids of warnings raised in this iteration.
    pub raised: Vec<u64>,
    pub mismatches: Vec<MismatchReport>,
    pub word: StateWord,
    pub new_word: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link_fault: Option<String>,
}

impl IterationReport {
    /// Net changes over the iteration, attributed to the last phase that
    /// touched each variable.
    pub fn net_changes(&self) -> Vec<StateChange> {
        let mut first: BTreeMap<&str, bool> = BTreeMap::new();
        let mut last: BTreeMap<&str, (bool, Origin)> = BTreeMap::new();
        let mut order = Vec::new();
        for c in &self.changes {
            if !first.contains_key(c.var.as_str()) {
                first.insert(&c.var, c.from);
                order.push(c.var.as_str());
            }
            last.insert(&c.var, (c.to, c.origin));
        }
        order
            .into_iter()
            .filter_map(|v| {
                let (to, origin) = last[v];
                (first[v] != to).then(|| StateChange {
                    var: v.to_owned(),
                    from: first[v],
                    to,
                    origin,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwinSnapshot {
    pub iteration: u64,
    /// Seq of the last event emitted when the snapshot was taken.
    pub seq: u64,
    pub values: BTreeMap<String, bool>,
    pub params: Vec<AnalogParam>,
    pub word: StateWord,
    pub warnings: Vec<BackflowWarning>,
    /// Pending warning ids, first one presented to the operator.
    pub pending: Vec<u64>,
    pub return_flow: Vec<String>,
    pub mismatches: Vec<MismatchReport>,
    pub link_attached: bool,
}

#[derive(Debug, Error)]
pub enum TwinError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("a physical link needs a pause longer than 0 ms")]
    PauseRequired,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Command(#[from] CommandError),
    #[error(transparent)]
    History(#[from] HistoryError),
}

/// Running digital twin of one circuit. Owns its state; other threads talk
/// to it through commands and read snapshots.
pub struct Twin {
    graph: CircuitGraph,
    eqs: EquationSet,
    config: TwinConfig,
    variables: Vec<Variable>,
    values: State,
    previous: State,
    params: BTreeMap<String, AnalogParam>,
    iteration: u64,
    decay_counter: u64,
    decay_due: bool,
    mailbox: VecDeque<Command>,
    warnings: Vec<BackflowWarning>,
    queue: VecDeque<u64>,
    return_flow: BTreeSet<String>,
    link: Option<Box<dyn PhysicalLink>>,
    last_push: Option<Actuate>,
    force_push: bool,
    virtual_writes: BTreeSet<String>,
    history: Option<HistoryDb>,
    word: StateWord,
    mismatches: Vec<MismatchReport>,
    events: Vec<Event>,
    seq: u64,
    clock_ms: u64,
}

impl Twin {
    /// All variables off, parameters at their declared defaults.
    pub fn new(graph: CircuitGraph, eqs: EquationSet, config: TwinConfig) -> Result<Self, TwinError> {
        config.check(&graph)?;
        let variables = graph.variables();
        let values: State = variables.iter().map(|v| (v.id.clone(), false)).collect();
        let params = graph
            .params
            .iter()
            .map(|p| {
                let param = AnalogParam {
                    id: p.id.clone(),
                    value: p.default,
                    unit: p.unit.clone(),
                    last_writer: Writer::Virtual,
                    last_write_iteration: 0,
                };
                (p.id.clone(), param)
            })
            .collect();
        Ok(Twin {
            word: StateWord::from_state(&variables, &values),
            previous: values.clone(),
            values,
            variables,
            params,
            graph,
            eqs,
            config,
            iteration: 0,
            decay_counter: 0,
            decay_due: false,
            mailbox: VecDeque::new(),
            warnings: Vec::new(),
            queue: VecDeque::new(),
            return_flow: BTreeSet::new(),
            link: None,
            last_push: None,
            force_push: false,
            virtual_writes: BTreeSet::new(),
            history: None,
            mismatches: Vec::new(),
            events: Vec::new(),
            seq: 0,
            clock_ms: 0,
        })
    }

    pub fn graph(&self) -> &CircuitGraph {
        &self.graph
    }

    pub fn equations(&self) -> &EquationSet {
        &self.eqs
    }

    pub fn config(&self) -> &TwinConfig {
        &self.config
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn values(&self) -> &State {
        &self.values
    }

    pub fn value(&self, var: &str) -> Option<bool> {
        self.values.get(var).copied()
    }

    pub fn param(&self, id: &str) -> Option<&AnalogParam> {
        self.params.get(id)
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn word(&self) -> &StateWord {
        &self.word
    }

    pub fn warnings(&self) -> &[BackflowWarning] {
        &self.warnings
    }

    pub fn warning(&self, id: u64) -> Option<&BackflowWarning> {
        self.warnings.iter().find(|w| w.id == id)
    }

    /// The warning presented to the operator.
    pub fn head(&self) -> Option<&BackflowWarning> {
        self.queue.front().and_then(|id| self.warning(*id))
    }

    pub fn pending(&self) -> impl Iterator<Item = &BackflowWarning> {
        self.queue.iter().filter_map(|id| self.warning(*id))
    }

    pub fn return_flow(&self) -> &BTreeSet<String> {
        &self.return_flow
    }

    pub fn mismatches(&self) -> &[MismatchReport] {
        &self.mismatches
    }

    /// Milliseconds of virtual pause accumulated so far.
    pub fn virtual_clock_ms(&self) -> u64 {
        self.clock_ms
    }

    pub fn last_seq(&self) -> u64 {
        self.seq
    }

    pub fn drain_events(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.events)
    }

    pub fn history(&self) -> Option<&HistoryDb> {
        self.history.as_ref()
    }

    /// Start recording state words. The current word is observed at once.
    pub fn attach_history(&mut self, db: HistoryDb) -> Result<Observation, TwinError> {
        self.history = Some(db);
        let word = self.word.clone();
        self.observe(&word, self.iteration)
    }

    pub fn label_word(&mut self, word: &StateWord, label: Label, note: Option<String>) -> Result<(), TwinError> {
        let Some(db) = &mut self.history else {
            return Err(HistoryError::UnknownWord(word.clone()).into());
        };
        db.label(word, label, note.clone())?;
        self.emit(
            self.iteration,
            EventKind::WordLabeled,
            json!({"word": word, "label": label, "note": note}),
        );
        Ok(())
    }

    pub fn attach_link(&mut self, link: Box<dyn PhysicalLink>) -> Result<(), TwinError> {
        if self.config.pause_ms == 0 {
            return Err(TwinError::PauseRequired);
        }
        self.link = Some(link);
        self.last_push = None;
        Ok(())
    }

    pub fn detach_link(&mut self) -> Option<Box<dyn PhysicalLink>> {
        self.link.take()
    }

    pub fn has_link(&self) -> bool {
        self.link.is_some()
    }

    pub fn snapshot(&self) -> TwinSnapshot {
        TwinSnapshot {
            iteration: self.iteration,
            seq: self.seq,
            values: self.values.clone(),
            params: self.params.values().cloned().collect(),
            word: self.word.clone(),
            warnings: self.warnings.clone(),
            pending: self.queue.iter().copied().collect(),
            return_flow: self.return_flow.iter().cloned().collect(),
            mismatches: self.mismatches.clone(),
            link_attached: self.link.is_some(),
        }
    }

    fn emit(&mut self, iteration: u64, kind: EventKind, payload: serde_json::Value) {
        self.seq += 1;
        self.events.push(Event {
            seq: self.seq,
            iteration,
            kind,
            payload,
        });
    }

    fn observe(&mut self, word: &StateWord, at: u64) -> Result<Observation, TwinError> {
        let pending = !self.queue.is_empty();
        let Some(db) = &mut self.history else {
            return Ok(Observation {
                new: false,
                label: Label::Unseen,
                count: 0,
            });
        };
        let obs = db.observe(word, at, pending)?;
        if obs.new {
            self.emit(
                at,
                EventKind::WordUnseen,
                json!({"word": word, "label": obs.label, "count": obs.count}),
            );
        }
        Ok(obs)
    }

    fn set(&mut self, var: &str, value: bool, origin: Origin, changes: &mut Vec<StateChange>) {
        let slot = self.values.entry(var.to_owned()).or_default();
        if *slot != value {
            changes.push(StateChange {
                var: var.to_owned(),
                from: *slot,
                to: value,
                origin,
            });
            *slot = value;
        }
    }

    /// Queue a command for the next iteration. Acknowledgments take effect
    /// immediately.
    pub fn submit(&mut self, cmd: Command) -> Result<(), TwinError> {
        cmd.check(&self.graph)?;
        match cmd {
            Command::AckWarning { id } => self.ack(id),
            other => {
                self.mailbox.push_back(other);
                Ok(())
            }
        }
    }

    /// Acknowledge the presented warning.
    pub fn ack_head(&mut self) -> Result<(), TwinError> {
        let id = *self.queue.front().ok_or(CommandError::NothingPending)?;
        self.ack(id)
    }

    /// Acknowledge a warning and, in blocking mode, make the deferred
    /// assignment. Acknowledging twice does nothing.
    pub fn ack(&mut self, id: u64) -> Result<(), TwinError> {
        let idx = self
            .warnings
            .iter()
            .position(|w| w.id == id)
            .ok_or(CommandError::UnknownWarning(id))?;
        if self.warnings[idx].state == WarningState::Acknowledged {
            return Ok(());
        }
        self.warnings[idx].state = WarningState::Acknowledged;
        self.queue.retain(|q| *q != id);
        let warning = self.warnings[idx].clone();
        let at = self.iteration;
        self.emit(at, EventKind::WarningAcked, json!({"id": id, "target": warning.target}));
        let mut changes = Vec::new();
        self.set(&warning.target, true, Origin::Ack, &mut changes);
        if !changes.is_empty() {
            self.word = StateWord::from_state(&self.variables, &self.values);
            for c in &changes {
                self.emit(at, EventKind::StateChanged, self.change_payload(c));
            }
            let word = self.word.clone();
            self.observe(&word, at)?;
        }
        Ok(())
    }

    fn change_payload(&self, c: &StateChange) -> serde_json::Value {
        json!({"variable": c.var, "value": c.to, "origin": c.origin, "word": self.word})
    }

    fn apply(&mut self, cmd: Command, changes: &mut Vec<StateChange>) {
        match cmd {
            Command::SetActuator { id, value } => self.set(&id, value, Origin::Command, changes),
            Command::SetInput { id, value } => {
                self.return_flow.remove(&id);
                self.set(&id, value, Origin::Command, changes);
            }
            Command::EmptyVariable { id } => self.set(&id, false, Origin::Command, changes),
            Command::FillVariable { id } => self.set(&id, true, Origin::Command, changes),
            Command::SetParam { id, value } => {
                let at = self.iteration;
                if let Some(p) = self.params.get_mut(&id) {
                    p.value = value;
                    p.last_writer = Writer::Virtual;
                    p.last_write_iteration = at;
                }
                self.virtual_writes.insert(id.clone());
                self.emit(at, EventKind::ParamChanged, json!({"id": id, "value": value, "writer": Writer::Virtual}));
            }
            Command::AckWarning { id } => {
                // acknowledgments never reach the mailbox, but stay harmless
                let _ = self.ack(id);
            }
        }
    }

    fn pending_for(&self, target: &str) -> bool {
        self.queue.iter().any(|id| self.warning(*id).is_some_and(|w| w.target == target))
    }

    fn raise(&mut self, target: &str, kind: WarningKind, source_terms: Vec<String>, at: u64) -> u64 {
        let id = self.warnings.last().map_or(1, |w| w.id + 1);
        let state = match self.config.ack_mode {
            AckMode::Blocking => WarningState::Pending,
            AckMode::Auto => WarningState::Acknowledged,
        };
        let warning = BackflowWarning {
            id,
            target: target.to_owned(),
            kind,
            source_terms,
            raised_at: at,
            state,
        };
        let payload = serde_json::to_value(&warning).unwrap_or_default();
        self.warnings.push(warning);
        self.emit(at, EventKind::WarningRaised, payload);
        match state {
            WarningState::Pending => self.queue.push_back(id),
            WarningState::Acknowledged => {
                self.emit(at, EventKind::WarningAcked, json!({"id": id, "target": target}));
            }
        }
        id
    }

    fn link_fault(&mut self, at: u64, message: String, report: &mut IterationReport) {
        self.link = None;
        self.emit(at, EventKind::LinkFault, json!({"message": message}));
        report.link_fault = Some(message);
    }

    /// Run one pass of the loop.
    pub fn run_iteration(&mut self) -> Result<IterationReport, TwinError> {
        let at = self.iteration;
        let mut changes = Vec::new();
        let mut report = IterationReport {
            iteration: at,
            passes: 0,
            converged: true,
            changes: Vec::new(),
            raised: Vec::new(),
            mismatches: Vec::new(),
            word: self.word.clone(),
            new_word: false,
            link_fault: None,
        };

        // 1. consumption reset due from last iteration, then commands
        if self.decay_due {
            self.decay_due = false;
            let targets: Vec<String> = self
                .graph
                .segments
                .iter()
                .filter(|s| s.role != Role::Input && !self.config.has_sensor(&s.id))
                .map(|s| s.id.clone())
                .collect();
            for t in targets {
                self.set(&t, false, Origin::Decay, &mut changes);
            }
        }
        self.virtual_writes.clear();
        while let Some(cmd) = self.mailbox.pop_front() {
            self.apply(cmd, &mut changes);
        }
        self.previous = self.values.clone();

        // 2. forward fill
        let fp = forward_fixpoint(&self.eqs, &mut self.values, &self.previous)?;
        report.passes = fp.passes;
        report.converged = fp.converged;
        changes.extend(fp.changes.into_iter().map(|c| StateChange {
            var: c.var,
            from: c.from,
            to: c.to,
            origin: if c.step == Step::One { Origin::Step1 } else { Origin::Step2 },
        }));

        // 3-5. physical side
        if self.link.is_some() {
            self.exchange(at, &mut changes, &mut report);
        } else {
            self.mismatches.clear();
        }

        // 6. backflow into internal variables
        for b in detect_backflows(&self.eqs, Step::Three, &self.values, &self.previous)? {
            if self.pending_for(&b.target) {
                continue;
            }
            report.raised.push(self.raise(&b.target, WarningKind::IvBackflow, b.sources, at));
            if self.config.ack_mode == AckMode::Auto {
                self.set(&b.target, true, Origin::Step3, &mut changes);
            }
        }

        // 7. backflow into inputs
        for b in detect_backflows(&self.eqs, Step::Four, &self.values, &self.previous)? {
            if self.pending_for(&b.target) {
                continue;
            }
            report.raised.push(self.raise(&b.target, WarningKind::InputBackflow, b.sources, at));
            self.return_flow.insert(b.target.clone());
            if self.config.ack_mode == AckMode::Auto {
                self.set(&b.target, true, Origin::Step4, &mut changes);
            }
        }
        for input in self.return_flow.clone() {
            let active = match self.eqs.get(Step::Four, &input) {
                Some(eq) => eq.expr.eval(&self.values, &self.previous)?,
                None => false,
            };
            if !active && !self.pending_for(&input) {
                self.return_flow.remove(&input);
            }
        }

        // 8. consumption reset
        if self.config.decay_interval > 0 {
            self.decay_counter += 1;
            if self.decay_counter >= self.config.decay_interval {
                self.decay_counter = 0;
                self.decay_due = true;
            }
        }

        // 9. new state word and events
        self.iteration += 1;
        let word = StateWord::from_state(&self.variables, &self.values);
        report.changes = changes;
        let changed = word != self.word;
        self.word = word.clone();
        for c in report.net_changes() {
            self.emit(at, EventKind::StateChanged, self.change_payload(&c));
        }
        if changed {
            report.new_word = self.observe(&word, at)?.new;
        }
        report.word = word;
        report.mismatches = self.mismatches.clone();
        Ok(report)
    }

    fn exchange(&mut self, at: u64, changes: &mut Vec<StateChange>, report: &mut IterationReport) {
        let msg = Actuate {
            states: self
                .variables
                .iter()
                .filter(|v| matches!(v.class, VarClass::Input | VarClass::InternalState))
                .map(|v| (v.id.clone(), self.values[&v.id]))
                .collect(),
            params: self.params.values().map(|p| (p.id.clone(), p.value)).collect(),
        };
        if self.force_push || self.last_push.as_ref() != Some(&msg) {
            let pushed = self.link.as_mut().map(|l| l.push(&msg));
            if let Some(Err(e)) = pushed {
                self.link_fault(at, e.to_string(), report);
                return;
            }
            self.last_push = Some(msg);
            self.force_push = false;
        }

        match self.config.pause_mode {
            PauseMode::Live => std::thread::sleep(Duration::from_millis(self.config.pause_ms)),
            PauseMode::Skip => {}
            PauseMode::Virtual => self.clock_ms += self.config.pause_ms,
        }

        let frame = match self.link.as_mut().map(|l| l.poll()) {
            Some(Ok(Some(frame))) => frame,
            Some(Ok(None)) | None => return,
            Some(Err(e)) => {
                self.link_fault(at, e.to_string(), report);
                return;
            }
        };

        let mut observed = State::new();
        for (var, reading) in &frame.readings {
            if !self.config.has_sensor(var) {
                continue;
            }
            match binarize(*reading, self.config.threshold(var)) {
                Ok(bit) => {
                    observed.insert(var.clone(), bit);
                }
                Err(e) => self.emit(at, EventKind::LinkFault, json!({"message": format!("{var}: {e}")})),
            }
        }
        self.mismatches = classify_mismatch(&self.graph, &self.values, &observed, &self.previous);
        for m in self.mismatches.clone() {
            self.emit(at, EventKind::Mismatch, serde_json::to_value(&m).unwrap_or_default());
        }
        for (var, bit) in observed {
            if matches!(self.graph.role_of(&var), Some(Role::Output | Role::InternalVariable)) {
                self.set(&var, bit, Origin::Sensor, changes);
            }
        }

        for (id, value) in frame.params {
            let Some(p) = self.params.get(&id) else { continue };
            if p.value == value {
                continue;
            }
            if self.virtual_writes.contains(&id) {
                let kept = p.value;
                self.force_push = true;
                self.emit(
                    at,
                    EventKind::ParamChanged,
                    json!({"id": id, "value": kept, "writer": Writer::Virtual, "overwritten_physical": value}),
                );
            } else if let Some(p) = self.params.get_mut(&id) {
                p.value = value;
                p.last_writer = Writer::Physical;
                p.last_write_iteration = at;
                self.emit(at, EventKind::ParamChanged, json!({"id": id, "value": value, "writer": Writer::Physical}));
            }
        }
    }
}
