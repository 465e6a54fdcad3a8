use serde::Serialize;

use crate::circuit::{CircuitGraph, DeviceKind, Edge, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMode {
    /// Against the usual flow direction, one edge at a time.
    ForwardToInputs,
    /// Against the usual flow direction, through internal sections and
    /// sinks, up to the sources.
    ForwardToSources,
    /// Along any edge in either direction.
    Backflow,
}

impl PathMode {
    /// Roles ending a branch when no explicit stop set is wanted.
    pub fn default_stops(self) -> &'static [Role] {
        match self {
            PathMode::ForwardToSources => &[Role::Input],
            PathMode::ForwardToInputs | PathMode::Backflow => &Role::ALL,
        }
    }
}

/// Crossing of one edge, in the direction the fluid moves (towards the
/// target).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Traversal {
    pub edge: usize,
    pub from: String,
    pub to: String,
}

/// One branch leading to the target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathTerm {
    /// Segments crossed, nearest first; the last one ends the branch.
    pub segments: Vec<String>,
    /// Device literals met on the way, nearest first.
    pub actuators: Vec<String>,
    pub traversals: Vec<Traversal>,
    /// Check valve crossed against its direction. The branch is then a
    /// constant false term; `segments` and `actuators` stop at the valve.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocked_by: Option<String>,
}

impl PathTerm {
    pub fn terminal(&self) -> Option<&str> {
        self.segments.last().map(String::as_str)
    }

    pub fn is_blocked(&self) -> bool {
        self.blocked_by.is_some()
    }
}

/// Walk the devices of `edge` from `near` outwards while fluid flows from
/// `far` to `near`. Returns the literals met and the first blocking valve.
fn cross(graph: &CircuitGraph, edge: &Edge, far: &str, near: &str) -> (Vec<String>, Option<String>) {
    let ordered: Vec<&String> = if edge.from == near {
        edge.devices.iter().collect()
    } else {
        edge.devices.iter().rev().collect()
    };
    let mut literals = Vec::new();
    for id in ordered {
        let Some(dev) = graph.device(id) else { continue };
        if dev.kind == DeviceKind::CheckValve {
            let passable = matches!(&dev.allowed_direction, Some((a, b)) if a == far && b == near);
            if !passable {
                return (literals, Some(dev.id.clone()));
            }
        }
        if let Some(lit) = dev.literal() {
            literals.push(lit.to_owned());
        }
    }
    (literals, None)
}

/// Simple paths leading into `target`. A branch ends at the first segment
/// whose role is in `stops`; other segments are crossed and recorded.
/// Branches ending nowhere (dead ends) yield nothing. Blocked branches are
/// returned with `blocked_by` set so callers can drop or display them.
pub fn enumerate_paths(graph: &CircuitGraph, target: &str, mode: PathMode, stops: &[Role]) -> Vec<PathTerm> {
    let mut out = Vec::new();
    if graph.segment(target).is_none() {
        return out;
    }
    let mut visited = vec![target.to_owned()];
    let mut current = PathTerm {
        segments: Vec::new(),
        actuators: Vec::new(),
        traversals: Vec::new(),
        blocked_by: None,
    };
    walk(graph, target, mode, stops, &mut visited, &mut current, &mut out);
    out
}

fn walk(
    graph: &CircuitGraph,
    near: &str,
    mode: PathMode,
    stops: &[Role],
    visited: &mut Vec<String>,
    current: &mut PathTerm,
    out: &mut Vec<PathTerm>,
) {
    for (index, edge) in graph.incident_edges(near) {
        let Some(far) = edge.other(near) else { continue };
        if far == near || visited.iter().any(|v| v == far) {
            continue;
        }
        let usable = match mode {
            PathMode::Backflow => true,
            PathMode::ForwardToInputs | PathMode::ForwardToSources => edge.directed && edge.to == near,
        };
        if !usable {
            continue;
        }
        let (literals, blocked) = cross(graph, edge, far, near);
        let depth = (current.actuators.len(), current.segments.len(), current.traversals.len());
        current.actuators.extend(literals);
        current.traversals.push(Traversal {
            edge: index,
            from: far.to_owned(),
            to: near.to_owned(),
        });
        if let Some(valve) = blocked {
            let mut pruned = current.clone();
            pruned.blocked_by = Some(valve);
            out.push(pruned);
        } else {
            current.segments.push(far.to_owned());
            let role = graph.role_of(far).expect("edge endpoints are segments");
            if stops.contains(&role) {
                out.push(current.clone());
            } else {
                visited.push(far.to_owned());
                walk(graph, far, mode, stops, visited, current, out);
                visited.pop();
            }
        }
        current.actuators.truncate(depth.0);
        current.segments.truncate(depth.1);
        current.traversals.truncate(depth.2);
    }
}
