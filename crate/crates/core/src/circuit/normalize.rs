use std::collections::HashMap;

use thiserror::Error;

use super::{CircuitGraph, Role};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error("sources `{0}` and `{1}` are joined with no device between them")]
    AmbiguousSource(String, String),
    #[error("cannot merge `{0}` ({1}) with `{2}` ({3}): different segment kinds")]
    KindConflict(String, &'static str, String, &'static str),
}

/// Merge internal pipe sections joined without a device into one segment.
///
/// Only joins between two internal variables merge; the survivor is the
/// section declared first. A device-less join touching a source or sink is
/// kept as a wire, since sources and sinks keep their own identity.
pub fn normalize(mut graph: CircuitGraph) -> Result<CircuitGraph, NormalizeError> {
    let rank: HashMap<String, usize> = graph
        .declaration_order
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i))
        .collect();
    let mut parent: HashMap<String, String> = HashMap::new();

    fn find(parent: &HashMap<String, String>, id: &str) -> String {
        let mut cur = id.to_owned();
        while let Some(p) = parent.get(&cur) {
            cur = p.clone();
        }
        cur
    }

    for edge in graph.edges.iter().filter(|e| e.is_wire()) {
        let (Some(a), Some(b)) = (graph.segment(&edge.from), graph.segment(&edge.to)) else {
            continue;
        };
        match (a.role, b.role) {
            (Role::Input, Role::Input) => {
                return Err(NormalizeError::AmbiguousSource(a.id.clone(), b.id.clone()));
            }
            (Role::InternalVariable, Role::InternalVariable) => {
                if a.kind != b.kind {
                    return Err(NormalizeError::KindConflict(
                        a.id.clone(),
                        a.kind.keyword(),
                        b.id.clone(),
                        b.kind.keyword(),
                    ));
                }
                let ra = find(&parent, &a.id);
                let rb = find(&parent, &b.id);
                if ra != rb {
                    let (keep, gone) = if rank[&ra] <= rank[&rb] { (ra, rb) } else { (rb, ra) };
                    parent.insert(gone, keep);
                }
            }
            _ => {}
        }
    }
    if parent.is_empty() {
        return Ok(graph);
    }

    let rename = |id: &mut String| {
        let root = find(&parent, id);
        if root != *id {
            *id = root;
        }
    };
    graph.segments.retain(|s| !parent.contains_key(&s.id));
    graph.declaration_order.retain(|id| !parent.contains_key(id));
    for edge in &mut graph.edges {
        rename(&mut edge.from);
        rename(&mut edge.to);
    }
    graph.edges.retain(|e| !(e.is_wire() && e.from == e.to));
    for dev in &mut graph.devices {
        if let Some((a, b)) = &mut dev.endpoints {
            rename(a);
            rename(b);
        }
        if let Some((a, b)) = &mut dev.allowed_direction {
            rename(a);
            rename(b);
        }
        if let Some(f) = &mut dev.follows {
            rename(f);
        }
    }
    Ok(graph)
}
