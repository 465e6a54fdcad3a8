//! Circuit descriptions: Boolean segments (pipes, conductors, signal lines)
//! joined by devices (actuators, check valves, manual valves).
//!
//! A netlist goes through three stages before synthesis:
//! [`parse_netlist`] resolves identifiers and keeps the declaration order,
//! [`normalize`] merges internal pipe sections joined without a device, and
//! [`validate`] reports topology problems.

mod emit;
mod layout;
mod normalize;
mod parse;
mod validate;

use serde::{Deserialize, Serialize};

pub use emit::emit_netlist;
pub use layout::{auto_layout, Placement};
pub use normalize::{normalize, NormalizeError};
pub use parse::{parse_netlist, parse_netlist_named, ParseError, ParseErrorKind};
pub use validate::{validate, Finding, Severity, ValidationReport};

/// Role of a segment in the equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Declared source (`source`).
    Input,
    /// Declared sink (`sink`).
    Output,
    /// Any other section that can hold fluid or charge.
    InternalVariable,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Input, Role::Output, Role::InternalVariable];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Fluid,
    Electrical,
    Signal,
}

impl SegmentKind {
    pub fn keyword(self) -> &'static str {
        match self {
            SegmentKind::Fluid => "fluid",
            SegmentKind::Electrical => "electrical",
            SegmentKind::Signal => "signal",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        match word {
            "fluid" => Some(SegmentKind::Fluid),
            "electrical" => Some(SegmentKind::Electrical),
            "signal" => Some(SegmentKind::Signal),
            _ => None,
        }
    }
}

/// Optional drawing position, with extra points for the pipe path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutHint {
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: String,
    pub role: Role,
    pub kind: SegmentKind,
    /// Signal lines do not store their value: no previous-state term.
    pub memoryless: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display: Option<LayoutHint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    Actuator,
    CheckValve,
    ManualValve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub id: String,
    pub kind: DeviceKind,
    /// Segments on either side, in the order of the `connect` chain.
    pub endpoints: Option<(String, String)>,
    /// Passable flow direction of a check valve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed_direction: Option<(String, String)>,
    /// Manual valves are drawn but left out of the equations.
    pub transparent: bool,
    /// Actuator driven by the state of another segment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub follows: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display: Option<LayoutHint>,
}

impl Device {
    /// Variable gating this device in a product term, if any.
    pub fn literal(&self) -> Option<&str> {
        match self.kind {
            DeviceKind::Actuator => Some(self.follows.as_deref().unwrap_or(&self.id)),
            DeviceKind::ManualValve if !self.transparent => Some(&self.id),
            _ => None,
        }
    }

    /// Whether the device carries its own Boolean state (an internal state).
    pub fn is_state_variable(&self) -> bool {
        match self.kind {
            DeviceKind::Actuator => self.follows.is_none(),
            DeviceKind::ManualValve => !self.transparent,
            DeviceKind::CheckValve => false,
        }
    }
}

/// A connection between two segments through zero or more devices in
/// series. `from -> to` is the usual flow direction when `directed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    /// Devices in chain order, from `from` towards `to`.
    pub devices: Vec<String>,
    pub directed: bool,
}

impl Edge {
    pub fn is_wire(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn touches(&self, segment: &str) -> bool {
        self.from == segment || self.to == segment
    }

    /// The segment at the other end, when `segment` is an endpoint.
    pub fn other(&self, segment: &str) -> Option<&str> {
        if self.from == segment {
            Some(&self.to)
        } else if self.to == segment {
            Some(&self.from)
        } else {
            None
        }
    }
}

/// Analog common parameter shared by the virtual and physical sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDecl {
    pub id: String,
    pub default: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

/// Class of a Boolean variable of the twin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarClass {
    Input,
    Output,
    InternalVariable,
    InternalState,
}

impl From<Role> for VarClass {
    fn from(role: Role) -> Self {
        match role {
            Role::Input => VarClass::Input,
            Role::Output => VarClass::Output,
            Role::InternalVariable => VarClass::InternalVariable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub id: String,
    pub class: VarClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitGraph {
    pub name: String,
    /// Default kind for segments declared without one.
    pub kind: SegmentKind,
    pub segments: Vec<Segment>,
    pub devices: Vec<Device>,
    pub edges: Vec<Edge>,
    pub params: Vec<ParamDecl>,
    /// Every declared segment and device id, in source order.
    pub declaration_order: Vec<String>,
}

impl CircuitGraph {
    pub fn segment(&self, id: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.id == id)
    }

    pub fn device(&self, id: &str) -> Option<&Device> {
        self.devices.iter().find(|d| d.id == id)
    }

    pub fn param(&self, id: &str) -> Option<&ParamDecl> {
        self.params.iter().find(|p| p.id == id)
    }

    pub fn role_of(&self, id: &str) -> Option<Role> {
        self.segment(id).map(|s| s.role)
    }

    pub fn segments_with_role(&self, role: Role) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(move |s| s.role == role)
    }

    /// Boolean variables of the twin (segments plus internal states), in
    /// declaration order. This order fixes the bit positions of state words.
    pub fn variables(&self) -> Vec<Variable> {
        self.declaration_order
            .iter()
            .filter_map(|id| {
                if let Some(seg) = self.segment(id) {
                    Some(Variable {
                        id: seg.id.clone(),
                        class: seg.role.into(),
                    })
                } else {
                    self.device(id)
                        .filter(|d| d.is_state_variable())
                        .map(|d| Variable {
                            id: d.id.clone(),
                            class: VarClass::InternalState,
                        })
                }
            })
            .collect()
    }

    /// Position of `id` in the declaration order.
    pub fn rank(&self, id: &str) -> Option<usize> {
        self.declaration_order.iter().position(|d| d == id)
    }

    /// Turn manual valves into full actuators with their own literal.
    pub fn promote_manual_valves(&mut self) {
        for dev in &mut self.devices {
            if dev.kind == DeviceKind::ManualValve {
                dev.transparent = false;
            }
        }
    }

    /// Edges incident to `segment`, with their indices.
    pub fn incident_edges<'a>(&'a self, segment: &'a str) -> impl Iterator<Item = (usize, &'a Edge)> + 'a {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.touches(segment))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    #[test]
    fn circuit1_variables_follow_declaration_order() {
        let g = normalize(parse_netlist(bundled::CIRCUIT1).unwrap()).unwrap();
        let ids: Vec<_> = g.variables().into_iter().map(|v| v.id).collect();
        assert_eq!(ids, ["E1", "F1", "E2", "E4", "E3", "S1", "S2"]);
    }

    #[test]
    fn transparent_and_coupled_devices_are_not_variables() {
        let g = normalize(parse_netlist(bundled::CIS).unwrap()).unwrap();
        let ids: Vec<_> = g.variables().into_iter().map(|v| v.id).collect();
        assert!(!ids.contains(&"v_man1".to_string()));
        assert!(!ids.contains(&"Gate_at_T".to_string()));
        assert_eq!(ids.len(), 12);
        assert_eq!(g.device("Gate_at_T").unwrap().literal(), Some("G_at_T"));
    }

    #[test]
    fn promoted_manual_valve_gets_a_literal() {
        let mut g = normalize(parse_netlist(bundled::CIS).unwrap()).unwrap();
        assert_eq!(g.device("v_man1").unwrap().literal(), None);
        g.promote_manual_valves();
        assert_eq!(g.device("v_man1").unwrap().literal(), Some("v_man1"));
        assert!(g.variables().iter().any(|v| v.id == "v_man1"));
    }
}
