use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{CircuitGraph, Role};

/// Operator order. All but `AckWarning` wait in the mailbox until the
/// start of the next iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    SetActuator { id: String, value: bool },
    SetInput { id: String, value: bool },
    /// Simulate consumption: switch an output or internal variable off.
    EmptyVariable { id: String },
    FillVariable { id: String },
    SetParam { id: String, value: f64 },
    AckWarning { id: u64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CommandError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("`{0}` is not an actuator with its own state")]
    NotAnActuator(String),
    #[error("`{0}` is not an input")]
    NotAnInput(String),
    #[error("`{0}` is an input: toggle it instead")]
    InputNotEmptiable(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("parameter value {0} is not finite")]
    NonFinite(f64),
    #[error("no warning with id {0}")]
    UnknownWarning(u64),
    #[error("no warning is pending")]
    NothingPending,
}

impl Command {
    pub fn check(&self, graph: &CircuitGraph) -> Result<(), CommandError> {
        match self {
            Command::SetActuator { id, .. } => match graph.device(id) {
                Some(d) if d.is_state_variable() => Ok(()),
                Some(_) => Err(CommandError::NotAnActuator(id.clone())),
                None if graph.segment(id).is_some() => Err(CommandError::NotAnActuator(id.clone())),
                None => Err(CommandError::UnknownVariable(id.clone())),
            },
            Command::SetInput { id, .. } => match graph.role_of(id) {
                Some(Role::Input) => Ok(()),
                Some(_) => Err(CommandError::NotAnInput(id.clone())),
                None => Err(CommandError::UnknownVariable(id.clone())),
            },
            Command::EmptyVariable { id } | Command::FillVariable { id } => match graph.role_of(id) {
                Some(Role::Input) => Err(CommandError::InputNotEmptiable(id.clone())),
                Some(_) => Ok(()),
                None => Err(CommandError::UnknownVariable(id.clone())),
            },
            Command::SetParam { id, value } => {
                if graph.param(id).is_none() {
                    Err(CommandError::UnknownParam(id.clone()))
                } else if !value.is_finite() {
                    Err(CommandError::NonFinite(*value))
                } else {
                    Ok(())
                }
            }
            Command::AckWarning { .. } => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::circuit::{normalize, parse_netlist};

    #[test]
    fn json_shape() {
        let c: Command = serde_json::from_str(r#"{"type":"set_actuator","id":"E2","value":true}"#).unwrap();
        assert_eq!(
            c,
            Command::SetActuator {
                id: "E2".into(),
                value: true
            }
        );
        assert_eq!(
            serde_json::to_string(&Command::AckWarning { id: 3 }).unwrap(),
            r#"{"type":"ack_warning","id":3}"#
        );
    }

    #[test]
    fn targets_are_checked() {
        let g = normalize(parse_netlist(bundled::CIS).unwrap()).unwrap();
        let empty = |id: &str| Command::EmptyVariable { id: id.into() }.check(&g);
        assert_eq!(empty("Gas1"), Err(CommandError::InputNotEmptiable("Gas1".into())));
        assert!(empty("Gm").is_ok());
        assert_eq!(empty("nope"), Err(CommandError::UnknownVariable("nope".into())));
        let act = |id: &str| Command::SetActuator { id: id.into(), value: true }.check(&g);
        assert!(act("Trd").is_ok());
        assert_eq!(act("Gate_at_T"), Err(CommandError::NotAnActuator("Gate_at_T".into())));
        assert_eq!(act("v_man1"), Err(CommandError::NotAnActuator("v_man1".into())));
        let set = |v: f64| Command::SetParam { id: "SP_Furnace".into(), value: v }.check(&g);
        assert!(set(150.0).is_ok());
        assert_eq!(set(f64::NAN).unwrap_err().to_string(), "parameter value NaN is not finite");
    }
}
