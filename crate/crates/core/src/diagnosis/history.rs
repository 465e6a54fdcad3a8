use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::word::{fingerprint, Label, StateWord};
use crate::circuit::Variable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub word: StateWord,
    pub label: Label,
    pub first_seen: u64,
    pub count: u64,
    pub fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Free-form data for later analysis, never interpreted here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Observation {
    /// First time this word is seen: an alert for the operator.
    pub new: bool,
    pub label: Label,
    pub count: u64,
}

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("history i/o: {0}")]
    Io(#[from] io::Error),
    #[error("{path}:{line}: {source}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("record for {word} belongs to another circuit (fingerprint {found})")]
    FingerprintMismatch { word: StateWord, found: String },
    #[error("word {word} has {found} bits, the circuit has {expected} variables")]
    WidthMismatch {
        word: StateWord,
        expected: usize,
        found: usize,
    },
    #[error("unknown word {0}")]
    UnknownWord(StateWord),
}

/// Labeled state words of one circuit. When opened on a file, every change
/// appends the full updated record as one JSON line; reloading keeps the
/// last line per word, so the file doubles as the audit trail.
#[derive(Debug)]
pub struct HistoryDb {
    fingerprint: String,
    width: usize,
    records: BTreeMap<StateWord, HistoryRecord>,
    trail: Vec<HistoryRecord>,
    log: Option<BufWriter<File>>,
}

impl HistoryDb {
    pub fn new(variables: &[Variable]) -> Self {
        HistoryDb {
            fingerprint: fingerprint(variables),
            width: variables.len(),
            records: BTreeMap::new(),
            trail: Vec::new(),
            log: None,
        }
    }

    /// Load `path` if it exists and append to it from then on.
    pub fn open(path: impl AsRef<Path>, variables: &[Variable]) -> Result<Self, HistoryError> {
        let path = path.as_ref();
        let mut db = Self::new(variables);
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: HistoryRecord = serde_json::from_str(&line).map_err(|source| HistoryError::Corrupt {
                    path: path.to_owned(),
                    line: i + 1,
                    source,
                })?;
                db.check(&rec.word)?;
                if rec.fingerprint != db.fingerprint {
                    return Err(HistoryError::FingerprintMismatch {
                        word: rec.word,
                        found: rec.fingerprint,
                    });
                }
                db.trail.push(rec.clone());
                db.records.insert(rec.word.clone(), rec);
            }
        }
        db.log = Some(BufWriter::new(OpenOptions::new().create(true).append(true).open(path)?));
        Ok(db)
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, word: &StateWord) -> Option<&HistoryRecord> {
        self.records.get(word)
    }

    pub fn records(&self) -> impl Iterator<Item = &HistoryRecord> {
        self.records.values()
    }

    /// Every version of the record for `word`, oldest first.
    pub fn audit<'a>(&'a self, word: &'a StateWord) -> impl Iterator<Item = &'a HistoryRecord> + 'a {
        self.trail.iter().filter(move |r| &r.word == word)
    }

    fn check(&self, word: &StateWord) -> Result<(), HistoryError> {
        if word.len() != self.width {
            return Err(HistoryError::WidthMismatch {
                word: word.clone(),
                expected: self.width,
                found: word.len(),
            });
        }
        Ok(())
    }

    fn commit(&mut self, word: &StateWord) -> Result<(), HistoryError> {
        let rec = self.records[word].clone();
        if let Some(log) = &mut self.log {
            serde_json::to_writer(&mut *log, &rec).map_err(io::Error::from)?;
            log.write_all(b"\n")?;
            log.flush()?;
        }
        self.trail.push(rec);
        Ok(())
    }

    /// Record a new state word. A word first seen while a backflow warning
    /// is pending is labeled `backflow`; an `unseen` word seen again in
    /// that situation is relabeled.
    pub fn observe(&mut self, word: &StateWord, at: u64, backflow_pending: bool) -> Result<Observation, HistoryError> {
        self.check(word)?;
        let new = !self.records.contains_key(word);
        let rec = self.records.entry(word.clone()).or_insert_with(|| HistoryRecord {
            word: word.clone(),
            label: Label::Unseen,
            first_seen: at,
            count: 0,
            fingerprint: self.fingerprint.clone(),
            note: None,
            features: None,
        });
        rec.count += 1;
        if backflow_pending && rec.label == Label::Unseen {
            rec.label = Label::Backflow;
        }
        let obs = Observation {
            new,
            label: rec.label,
            count: rec.count,
        };
        self.commit(word)?;
        Ok(obs)
    }

    /// Expert label. Any label may replace any other.
    pub fn label(&mut self, word: &StateWord, label: Label, note: Option<String>) -> Result<(), HistoryError> {
        let rec = self
            .records
            .get_mut(word)
            .ok_or_else(|| HistoryError::UnknownWord(word.clone()))?;
        rec.label = label;
        if note.is_some() {
            rec.note = note;
        }
        self.commit(word)
    }

    /// Compacted copy: one line per word.
    pub fn write_snapshot(&self, path: impl AsRef<Path>) -> Result<(), HistoryError> {
        let mut out = BufWriter::new(File::create(path)?);
        for rec in self.records.values() {
            serde_json::to_writer(&mut out, rec).map_err(io::Error::from)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}

impl PartialEq for HistoryDb {
    fn eq(&self, other: &Self) -> bool {
        self.fingerprint == other.fingerprint && self.records == other.records
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::circuit::{normalize, parse_netlist};

    fn vars() -> Vec<Variable> {
        normalize(parse_netlist(bundled::CIRCUIT1).unwrap()).unwrap().variables()
    }

    fn w(s: &str) -> StateWord {
        s.parse().unwrap()
    }

    #[test]
    fn first_word_is_new_then_known() {
        let mut db = HistoryDb::new(&vars());
        let first = db.observe(&w("0000000"), 0, false).unwrap();
        assert!(first.new);
        assert_eq!(first.label, Label::Unseen);
        let again = db.observe(&w("0000000"), 5, false).unwrap();
        assert!(!again.new);
        assert_eq!(again.count, 2);
        assert_eq!(db.get(&w("0000000")).unwrap().first_seen, 0);
    }

    #[test]
    fn pending_backflow_labels_the_word() {
        let mut db = HistoryDb::new(&vars());
        assert_eq!(db.observe(&w("1010110"), 3, true).unwrap().label, Label::Backflow);
        db.observe(&w("1010100"), 4, false).unwrap();
        assert_eq!(db.observe(&w("1010100"), 5, true).unwrap().label, Label::Backflow);
        db.label(&w("1010100"), Label::Normal, None).unwrap();
        assert_eq!(db.observe(&w("1010100"), 6, true).unwrap().label, Label::Normal);
    }

    #[test]
    fn width_and_unknown_words_are_rejected() {
        let mut db = HistoryDb::new(&vars());
        assert!(matches!(db.observe(&w("01"), 0, false), Err(HistoryError::WidthMismatch { .. })));
        assert!(matches!(
            db.label(&w("0000001"), Label::Normal, None),
            Err(HistoryError::UnknownWord(_))
        ));
    }

    #[test]
    fn log_reload_reproduces_the_db() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hd.jsonl");
        let mut db = HistoryDb::open(&path, &vars()).unwrap();
        db.observe(&w("0000000"), 0, false).unwrap();
        db.observe(&w("1010110"), 1, false).unwrap();
        db.observe(&w("0000000"), 2, false).unwrap();
        db.label(&w("1010110"), Label::Normal, Some("fill".into())).unwrap();
        db.label(&w("1010110"), Label::Leakage, None).unwrap();

        let back = HistoryDb::open(&path, &vars()).unwrap();
        assert_eq!(back, db);
        let rec = back.get(&w("1010110")).unwrap();
        assert_eq!(rec.label, Label::Leakage);
        assert_eq!(rec.note.as_deref(), Some("fill"));
        let labels: Vec<_> = back.audit(&w("1010110")).map(|r| r.label).collect();
        assert_eq!(labels, [Label::Unseen, Label::Normal, Label::Leakage]);

        let snap = dir.path().join("hd.snapshot.jsonl");
        db.write_snapshot(&snap).unwrap();
        assert_eq!(std::fs::read_to_string(&snap).unwrap().lines().count(), 2);
        assert_eq!(HistoryDb::open(&snap, &vars()).unwrap(), db);
    }

    #[test]
    fn foreign_log_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hd.jsonl");
        let mut db = HistoryDb::open(&path, &vars()).unwrap();
        db.observe(&w("0000000"), 0, false).unwrap();
        drop(db);
        let mut other = vars();
        other.swap(0, 1);
        assert!(matches!(
            HistoryDb::open(&path, &other),
            Err(HistoryError::FingerprintMismatch { .. })
        ));
        std::fs::write(&path, "{not json\n").unwrap();
        assert!(matches!(HistoryDb::open(&path, &vars()), Err(HistoryError::Corrupt { line: 1, .. })));
    }
}
