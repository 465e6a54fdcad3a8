//! Historical database of state words and comparison of predicted with
//! observed states.
//!
//! Every change of the twin's state word is looked up in a [`HistoryDb`].
//! New words are recorded as `unseen` (or `backflow` when a warning is
//! pending) and wait for an expert label. [`classify_mismatch`] gives an
//! advisory leak or blockage hypothesis for sensors that disagree with the
//! equations.

mod history;
mod mismatch;
mod word;

pub use history::{HistoryDb, HistoryError, HistoryRecord, Observation};
pub use mismatch::{classify_mismatch, Evidence, Hypothesis, MismatchReport};
pub use word::{fingerprint, Label, LabelError, StateWord, WordError};
