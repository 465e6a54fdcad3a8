use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::circuit::Variable;
use crate::diagnosis::{HistoryDb, HistoryError, Label, StateWord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    StateChanged,
    WarningRaised,
    WarningAcked,
    WordUnseen,
    Mismatch,
    ParamChanged,
    LinkFault,
    WordLabeled,
}

/// What last changed a variable during an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Command,
    Step1,
    Step2,
    Sensor,
    Step3,
    Step4,
    Ack,
    Decay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub iteration: u64,
    pub kind: EventKind,
    pub payload: serde_json::Value,
}

/// Rebuild the history database from an event log, as the twin filled it:
/// the initial all-zero word first, then every new word carried by a
/// `state_changed` event, with operator labels applied in order.
pub fn replay_history<'a>(
    variables: &[Variable],
    events: impl IntoIterator<Item = &'a Event>,
) -> Result<HistoryDb, HistoryError> {
    let mut db = HistoryDb::new(variables);
    let mut last = StateWord::zeros(variables.len());
    db.observe(&last, 0, false)?;
    let mut pending = BTreeSet::new();
    for ev in events {
        match ev.kind {
            EventKind::WarningRaised if ev.payload["state"] == "pending" => {
                pending.insert(ev.payload["id"].as_u64());
            }
            EventKind::WarningAcked => {
                pending.remove(&ev.payload["id"].as_u64());
            }
            EventKind::StateChanged => {
                let Some(word) = ev.payload["word"].as_str().and_then(|w| w.parse::<StateWord>().ok()) else {
                    continue;
                };
                if word != last {
                    db.observe(&word, ev.iteration, !pending.is_empty())?;
                    last = word;
                }
            }
            EventKind::WordLabeled => {
                let word = ev.payload["word"].as_str().and_then(|w| w.parse::<StateWord>().ok());
                let label = serde_json::from_value::<Label>(ev.payload["label"].clone()).ok();
                if let (Some(word), Some(label)) = (word, label) {
                    let note = ev.payload["note"].as_str().map(str::to_owned);
                    db.label(&word, label, note)?;
                }
            }
            _ => {}
        }
    }
    Ok(db)
}
