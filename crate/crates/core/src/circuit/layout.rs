use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use super::{CircuitGraph, Role};

const COLUMN: f64 = 160.0;
const ROW: f64 = 100.0;

/// Drawing position of a segment or device.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Placement {
    pub id: String,
    pub x: f64,
    pub y: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub path: Vec<(f64, f64)>,
    /// True when the position comes from a `layout` line.
    pub declared: bool,
}

/// Positions for every segment and device. Declared hints win; the rest is
/// laid out in columns by distance from the sources, sinks in the last
/// column. Devices sit between the segments they join.
pub fn auto_layout(graph: &CircuitGraph) -> Vec<Placement> {
    let mut depth: HashMap<&str, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    for s in graph.segments_with_role(Role::Input) {
        depth.insert(&s.id, 0);
        queue.push_back(s.id.as_str());
    }
    while let Some(cur) = queue.pop_front() {
        let d = depth[cur];
        for (_, edge) in graph.incident_edges(cur) {
            let next = edge.other(cur).unwrap_or(cur);
            if !depth.contains_key(next) {
                depth.insert(next, d + 1);
                queue.push_back(next);
            }
        }
    }
    let deepest = depth.values().copied().max().unwrap_or(0);
    let column = |id: &str, role: Role| match role {
        Role::Output => deepest.max(1) * 2,
        _ => depth.get(id).map(|d| d * 2).unwrap_or(deepest * 2 + 1),
    };

    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut pos: HashMap<&str, (f64, f64)> = HashMap::new();
    let mut out = Vec::new();
    for seg in &graph.segments {
        let (x, y, path, declared) = match &seg.display {
            Some(h) => (h.x, h.y, h.path.clone(), true),
            None => {
                let col = column(&seg.id, seg.role);
                let row = rows.entry(col).or_default();
                *row += 1;
                (col as f64 * COLUMN / 2.0, (*row - 1) as f64 * ROW, Vec::new(), false)
            }
        };
        pos.insert(&seg.id, (x, y));
        out.push(Placement {
            id: seg.id.clone(),
            x,
            y,
            path,
            declared,
        });
    }
    for edge in &graph.edges {
        let (Some(a), Some(b)) = (pos.get(edge.from.as_str()), pos.get(edge.to.as_str())) else {
            continue;
        };
        let n = edge.devices.len() as f64 + 1.0;
        for (i, id) in edge.devices.iter().enumerate() {
            let Some(dev) = graph.device(id) else { continue };
            let t = (i as f64 + 1.0) / n;
            out.push(match &dev.display {
                Some(h) => Placement {
                    id: id.clone(),
                    x: h.x,
                    y: h.y,
                    path: h.path.clone(),
                    declared: true,
                },
                None => Placement {
                    id: id.clone(),
                    x: a.0 + (b.0 - a.0) * t,
                    y: a.1 + (b.1 - a.1) * t,
                    path: Vec::new(),
                    declared: false,
                },
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::circuit::{normalize, parse_netlist};

    #[test]
    fn declared_hints_are_kept() {
        let g = normalize(parse_netlist(bundled::CIRCUIT1).unwrap()).unwrap();
        let placed = auto_layout(&g);
        assert_eq!(placed.len(), 7);
        assert!(placed.iter().all(|p| p.declared));
        let e3 = placed.iter().find(|p| p.id == "E3").unwrap();
        assert_eq!((e3.x, e3.y), (160.0, 0.0));
    }

    #[test]
    fn sources_left_sinks_right() {
        let g = normalize(parse_netlist(bundled::CIS).unwrap()).unwrap();
        let placed = auto_layout(&g);
        let x = |id: &str| placed.iter().find(|p| p.id == id).unwrap().x;
        assert_eq!(x("Gas1"), 0.0);
        assert!(x("Gm") > x("Gas1"));
        assert!(x("G_at_T") >= x("Gm"));
        assert!(x("Trd") > x("Gm") && x("Trd") < x("G_at_T"));
        assert_eq!(placed.len(), g.segments.len() + g.devices.len());
        assert_eq!(placed, auto_layout(&g));
    }
}
