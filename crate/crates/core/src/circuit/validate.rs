use std::collections::{HashSet, VecDeque};

use serde::Serialize;

use super::{CircuitGraph, DeviceKind, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    /// Identifier the finding is about.
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Warning)
    }

    pub fn is_ok(&self) -> bool {
        self.errors().next().is_none()
    }

    fn push(&mut self, severity: Severity, subject: &str, message: String) {
        self.findings.push(Finding {
            severity,
            subject: subject.to_owned(),
            message,
        });
    }
}

/// Segments reachable from any source along usual flow directions,
/// whatever the actuator states.
fn forward_reachable(graph: &CircuitGraph) -> HashSet<String> {
    let mut seen: HashSet<String> = graph.segments_with_role(Role::Input).map(|s| s.id.clone()).collect();
    let mut queue: VecDeque<String> = seen.iter().cloned().collect();
    while let Some(cur) = queue.pop_front() {
        for edge in graph.edges.iter().filter(|e| e.directed && e.from == cur) {
            let blocked = edge.devices.iter().filter_map(|d| graph.device(d)).any(|d| {
                matches!(&d.allowed_direction, Some((a, b)) if *a != edge.from || *b != edge.to)
            });
            if !blocked && seen.insert(edge.to.clone()) {
                queue.push_back(edge.to.clone());
            }
        }
    }
    seen
}

pub fn validate(graph: &CircuitGraph) -> ValidationReport {
    let mut report = ValidationReport::default();

    for dev in &graph.devices {
        let Some((a, b)) = &dev.endpoints else {
            report.push(Severity::Warning, &dev.id, format!("device `{}` is not connected", dev.id));
            continue;
        };
        if dev.kind != DeviceKind::CheckValve {
            continue;
        }
        let Some((from, to)) = &dev.allowed_direction else {
            continue;
        };
        for end in [from, to] {
            if graph.segment(end).is_none() {
                report.push(
                    Severity::Error,
                    &dev.id,
                    format!("check valve `{}` references missing segment `{end}`", dev.id),
                );
            }
        }
        let directed = graph
            .edges
            .iter()
            .any(|e| e.directed && e.devices.contains(&dev.id));
        if (from, to) == (b, a) && directed {
            report.push(
                Severity::Error,
                &dev.id,
                format!("check valve `{}` only passes {from} -> {to}, against its connection", dev.id),
            );
        } else if (from, to) != (a, b) && (from, to) != (b, a) {
            report.push(
                Severity::Error,
                &dev.id,
                format!("check valve `{}` direction {from} -> {to} does not match its connection {a} -- {b}", dev.id),
            );
        }
    }

    let reachable = forward_reachable(graph);
    for seg in &graph.segments {
        match seg.role {
            Role::Input => {}
            Role::Output if graph.incident_edges(&seg.id).next().is_none() => {
                report.push(Severity::Warning, &seg.id, format!("isolated output `{}`", seg.id));
            }
            Role::Output if !reachable.contains(&seg.id) => {
                report.push(Severity::Error, &seg.id, format!("output `{}` is unreachable from any source", seg.id));
            }
            Role::InternalVariable if !reachable.contains(&seg.id) => {
                report.push(
                    Severity::Warning,
                    &seg.id,
                    format!("`{}` has no path from a source and can only fill by backflow", seg.id),
                );
            }
            _ => {}
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::circuit::{normalize, parse_netlist};

    fn check(text: &str) -> ValidationReport {
        validate(&normalize(parse_netlist(text).unwrap()).unwrap())
    }

    #[test]
    fn bundled_circuits_validate_cleanly() {
        for text in [bundled::CIRCUIT1, bundled::CIRCUIT2, bundled::ELECTRICAL, bundled::CIS] {
            let report = check(text);
            assert!(report.findings.is_empty(), "{:?}", report.findings);
        }
    }

    #[test]
    fn isolated_output_is_a_warning() {
        let report = check("circuit c\nsource a\nsink s\nsink lonely\nconnect a -- s\n");
        assert!(report.is_ok());
        let w: Vec<_> = report.warnings().collect();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].message, "isolated output `lonely`");
    }

    #[test]
    fn reversed_check_valve_is_an_error() {
        let text = bundled::CIRCUIT2.replace("checkvalve cv : G1 -> H1", "checkvalve cv : H1 -> G1");
        let report = check(&text);
        let errors: Vec<_> = report.errors().collect();
        assert_eq!(errors.len(), 1, "{errors:?}");
        assert_eq!(errors[0].subject, "cv");
    }

    #[test]
    fn check_valve_on_foreign_segments() {
        let text = bundled::CIRCUIT2.replace("checkvalve cv : G1 -> H1", "checkvalve cv : G1 -> X9");
        let report = check(&text);
        assert_eq!(report.errors().count(), 2);
    }

    #[test]
    fn unreachable_output_and_backflow_only_section() {
        let report = check("circuit c\nsource a\nsink s\nsegment t\nactuator v\nconnect s -- v -- a\nconnect t -- a\n");
        let errors: Vec<_> = report.errors().map(|f| f.subject.as_str()).collect();
        assert_eq!(errors, ["s"]);
        let warnings: Vec<_> = report.warnings().map(|f| f.subject.as_str()).collect();
        assert_eq!(warnings, ["t"]);
    }
}
