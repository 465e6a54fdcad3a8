use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::circuit::{VarClass, Variable};
use crate::logic::State;

/// One bit per variable, in declaration order, written as `0`/`1` text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StateWord(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordError {
    #[error("state word may only contain 0 and 1, found {0:?}")]
    BadChar(char),
}

impl StateWord {
    /// Missing variables read as 0.
    pub fn from_state(variables: &[Variable], values: &State) -> Self {
        StateWord(
            variables
                .iter()
                .map(|v| if values.get(&v.id).copied().unwrap_or(false) { '1' } else { '0' })
                .collect(),
        )
    }

    pub fn zeros(width: usize) -> Self {
        StateWord("0".repeat(width))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.chars().map(|c| c == '1')
    }
}

impl FromStr for StateWord {
    type Err = WordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.chars().find(|c| *c != '0' && *c != '1') {
            Some(c) => Err(WordError::BadChar(c)),
            None => Ok(StateWord(s.to_owned())),
        }
    }
}

impl TryFrom<String> for StateWord {
    type Error = WordError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<StateWord> for String {
    fn from(w: StateWord) -> String {
        w.0
    }
}

impl fmt::Display for StateWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Hash of the variable list and classes. Two circuits with the same
/// fingerprint give the same meaning to every bit of a word.
pub fn fingerprint(variables: &[Variable]) -> String {
    let mut h = Sha256::new();
    for v in variables {
        let class = match v.class {
            VarClass::Input => "input",
            VarClass::Output => "output",
            VarClass::InternalVariable => "iv",
            VarClass::InternalState => "is",
        };
        h.update(v.id.as_bytes());
        h.update(b":");
        h.update(class.as_bytes());
        h.update(b"\n");
    }
    h.update(variables.len().to_string().as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Normal,
    Unseen,
    Backflow,
    Leakage,
    Blockage,
}

impl Label {
    pub const ALL: [Label; 5] = [Label::Normal, Label::Unseen, Label::Backflow, Label::Leakage, Label::Blockage];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Unseen => "unseen",
            Label::Backflow => "backflow",
            Label::Leakage => "leakage",
            Label::Blockage => "blockage",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown label `{0}`")]
pub struct LabelError(pub String);

impl FromStr for Label {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Label::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| LabelError(s.to_owned()))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::circuit::{normalize, parse_netlist};

    #[test]
    fn word_follows_declaration_order() {
        let g = normalize(parse_netlist(bundled::CIRCUIT1).unwrap()).unwrap();
        let vars = g.variables();
        let mut state = State::new();
        for v in ["E1", "E2", "E3", "S1"] {
            state.insert(v.into(), true);
        }
        assert_eq!(StateWord::from_state(&vars, &state).as_str(), "1010110");
        assert_eq!(StateWord::from_state(&vars, &State::new()), StateWord::zeros(7));
    }

    #[test]
    fn word_parsing() {
        assert_eq!("0110".parse::<StateWord>().unwrap().bits().collect::<Vec<_>>(), [false, true, true, false]);
        assert_eq!("01x".parse::<StateWord>(), Err(WordError::BadChar('x')));
        assert!(serde_json::from_str::<StateWord>("\"012\"").is_err());
    }

    #[test]
    fn fingerprint_depends_on_order_and_class() {
        let g1 = normalize(parse_netlist(bundled::CIRCUIT1).unwrap()).unwrap();
        let g2 = normalize(parse_netlist(bundled::CIRCUIT2).unwrap()).unwrap();
        let mut vars = g1.variables();
        let a = fingerprint(&vars);
        assert_eq!(a.len(), 64);
        assert_eq!(a, fingerprint(&g1.variables()));
        assert_ne!(a, fingerprint(&g2.variables()));
        vars.swap(0, 1);
        assert_ne!(a, fingerprint(&vars));
    }

    #[test]
    fn labels_are_a_closed_set() {
        for l in Label::ALL {
            assert_eq!(l.as_str().parse::<Label>().unwrap(), l);
        }
        assert_eq!("broken".parse::<Label>(), Err(LabelError("broken".into())));
        assert_eq!(serde_json::to_string(&Label::Leakage).unwrap(), "\"leakage\"");
    }
}
