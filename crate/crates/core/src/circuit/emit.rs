use std::fmt::Write;

use super::{CircuitGraph, DeviceKind, LayoutHint, Role};

fn layout_line(out: &mut String, id: &str, hint: &LayoutHint) {
    let _ = write!(out, "layout {id} {} {}", hint.x, hint.y);
    for (x, y) in &hint.path {
        let _ = write!(out, " {x} {y}");
    }
    out.push('\n');
}

/// Render a graph back to netlist text. Parsing the result gives back the
/// same graph.
pub fn emit_netlist(graph: &CircuitGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "circuit {} {}", graph.name, graph.kind.keyword());

    for id in &graph.declaration_order {
        if let Some(seg) = graph.segment(id) {
            let keyword = match seg.role {
                Role::Input => "source",
                Role::Output => "sink",
                Role::InternalVariable => "segment",
            };
            let _ = write!(out, "{keyword} {id}");
            if seg.kind != graph.kind {
                let _ = write!(out, " {}", seg.kind.keyword());
            }
            out.push('\n');
        } else if let Some(dev) = graph.device(id) {
            match dev.kind {
                DeviceKind::Actuator => match &dev.follows {
                    Some(f) => writeln!(out, "actuator {id} follows {f}"),
                    None => writeln!(out, "actuator {id}"),
                },
                DeviceKind::ManualValve => writeln!(out, "manual {id}"),
                DeviceKind::CheckValve => {
                    let (from, to) = dev.allowed_direction.clone().unwrap_or_default();
                    writeln!(out, "checkvalve {id} : {from} -> {to}")
                }
            }
            .expect("writing to a String");
        }
    }
    for p in &graph.params {
        let _ = write!(out, "param {} real {}", p.id, p.default);
        if let Some(unit) = &p.unit {
            let _ = write!(out, " {unit}");
        }
        out.push('\n');
    }

    if !graph.edges.is_empty() {
        out.push('\n');
    }
    for edge in &graph.edges {
        out.push_str(if edge.directed { "connect " } else { "link " });
        out.push_str(&edge.from);
        for dev in &edge.devices {
            let _ = write!(out, " -- {dev}");
        }
        let _ = writeln!(out, " -- {}", edge.to);
    }

    let mut hints = graph
        .declaration_order
        .iter()
        .filter_map(|id| {
            let hint = graph
                .segment(id)
                .and_then(|s| s.display.as_ref())
                .or_else(|| graph.device(id).and_then(|d| d.display.as_ref()))?;
            Some((id, hint))
        })
        .peekable();
    if hints.peek().is_some() {
        out.push('\n');
    }
    for (id, hint) in hints {
        layout_line(&mut out, id, hint);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::circuit::{normalize, parse_netlist};

    #[test]
    fn bundled_circuits_round_trip() {
        for text in [bundled::CIRCUIT1, bundled::CIRCUIT2, bundled::ELECTRICAL, bundled::CIS] {
            let g = normalize(parse_netlist(text).unwrap()).unwrap();
            let again = normalize(parse_netlist(&emit_netlist(&g)).unwrap()).unwrap();
            assert_eq!(again, g);
        }
    }

    #[test]
    fn emits_compound_edges_and_kinds() {
        let g = normalize(parse_netlist(bundled::CIS).unwrap()).unwrap();
        let text = emit_netlist(&g);
        assert!(text.contains("connect Gm -- Trd -- PC_TC -- G_at_T\n"));
        assert!(text.contains("segment MFIA_out signal\n"));
        assert!(text.contains("actuator Gate_at_T follows G_at_T\n"));
        assert!(text.contains("param SP_Furnace real 100 degC\n"));
    }
}
