use std::collections::BTreeMap;

use serde::Serialize;

use crate::circuit::{CircuitGraph, Edge};
use crate::logic::State;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hypothesis {
    Leakage,
    /// Devices commanded open between a pressurized neighbour and the dead
    /// section.
    Blockage { devices: Vec<String> },
    Unexplained,
}

/// Observed bits around the variable (predicted bits where there is no
/// sensor).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Evidence {
    pub upstream: BTreeMap<String, bool>,
    pub downstream: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MismatchReport {
    pub variable: String,
    pub predicted: bool,
    pub observed: bool,
    pub hypothesis: Hypothesis,
    pub evidence: Evidence,
}

struct Ctx<'a> {
    graph: &'a CircuitGraph,
    predicted: &'a State,
    observed: &'a State,
}

impl Ctx<'_> {
    fn live(&self, id: &str) -> bool {
        self.observed
            .get(id)
            .or_else(|| self.predicted.get(id))
            .copied()
            .unwrap_or(false)
    }

    fn dropped(&self, id: &str) -> bool {
        self.predicted.get(id) == Some(&true) && self.observed.get(id) == Some(&false)
    }

    /// Passable from `from` to `to` with the commanded device states.
    fn open(&self, edge: &Edge, from: &str, to: &str) -> bool {
        edge.devices.iter().all(|id| {
            let Some(dev) = self.graph.device(id) else { return false };
            let commanded = dev
                .literal()
                .map(|l| self.predicted.get(l).copied().unwrap_or(false))
                .unwrap_or(true);
            let direction = match &dev.allowed_direction {
                Some((a, b)) => a == from && b == to,
                None => true,
            };
            commanded && direction
        })
    }

    fn evidence(&self, var: &str) -> Evidence {
        let mut ev = Evidence::default();
        for (_, e) in self.graph.incident_edges(var) {
            let Some(u) = e.other(var) else { continue };
            if !e.directed || e.to == var {
                ev.upstream.insert(u.to_owned(), self.live(u));
            }
            if !e.directed || e.from == var {
                ev.downstream.insert(u.to_owned(), self.live(u));
            }
        }
        if let Some((a, b)) = self.graph.device(var).and_then(|d| d.endpoints.as_ref()) {
            ev.upstream.insert(a.clone(), self.live(a));
            ev.downstream.insert(b.clone(), self.live(b));
        }
        ev
    }

    fn lost(&self, var: &str, was_on: bool) -> Option<Hypothesis> {
        let mut blocked = Vec::new();
        let mut fed_by_drop = false;
        for (_, e) in self.graph.incident_edges(var) {
            let Some(u) = e.other(var) else { continue };
            let feeding = if e.is_wire() { true } else { e.directed && e.to == var };
            if !feeding {
                continue;
            }
            if self.dropped(u) {
                fed_by_drop = true;
            } else if self.live(u) && self.open(e, u, var) {
                if e.is_wire() {
                    return Some(Hypothesis::Leakage);
                }
                let gated: Vec<String> = e
                    .devices
                    .iter()
                    .filter(|d| self.graph.device(d).is_some_and(|d| d.literal().is_some()))
                    .cloned()
                    .collect();
                blocked.extend(if gated.is_empty() { e.devices.clone() } else { gated });
            }
        }
        if !blocked.is_empty() {
            blocked.sort();
            blocked.dedup();
            Some(Hypothesis::Blockage { devices: blocked })
        } else if was_on {
            Some(Hypothesis::Leakage)
        } else if fed_by_drop {
            None
        } else {
            Some(Hypothesis::Unexplained)
        }
    }

    fn gained(&self, var: &str) -> Option<Hypothesis> {
        let explained = self
            .graph
            .incident_edges(var)
            .any(|(_, e)| e.other(var).is_some_and(|u| self.live(u) && self.open(e, u, var)));
        (!explained).then_some(Hypothesis::Unexplained)
    }
}

/// Compare sensor bits with the equations' prediction. `predicted` holds
/// the twin's values (including commanded actuators), `observed` the
/// binarized readings, `previous` the state of the prior iteration.
///
/// A section seen empty while predicted full is a blockage when a device
/// commanded open separates it from a pressurized neighbour, a leak when
/// it is wired to a pressurized neighbour or was full before. Sections
/// emptied only because their supply is itself missing are not reported.
/// A section seen full while predicted empty is left to the backflow
/// equations when an open path to a pressurized neighbour exists.
pub fn classify_mismatch(
    graph: &CircuitGraph,
    predicted: &State,
    observed: &State,
    previous: &State,
) -> Vec<MismatchReport> {
    let ctx = Ctx {
        graph,
        predicted,
        observed,
    };
    let mut order: Vec<&String> = graph
        .declaration_order
        .iter()
        .filter(|id| observed.contains_key(*id))
        .collect();
    order.extend(observed.keys().filter(|id| graph.rank(id).is_none()));

    let mut out = Vec::new();
    for var in order {
        let seen = observed[var];
        let expected = predicted.get(var).copied().unwrap_or(false);
        if seen == expected {
            continue;
        }
        let hypothesis = if graph.device(var).is_some() {
            Some(if expected {
                Hypothesis::Blockage {
                    devices: vec![var.clone()],
                }
            } else {
                Hypothesis::Unexplained
            })
        } else if expected {
            ctx.lost(var, previous.get(var).copied().unwrap_or(false))
        } else {
            ctx.gained(var)
        };
        if let Some(hypothesis) = hypothesis {
            out.push(MismatchReport {
                variable: var.clone(),
                predicted: expected,
                observed: seen,
                hypothesis,
                evidence: ctx.evidence(var),
            });
        }
    }
    out
}
