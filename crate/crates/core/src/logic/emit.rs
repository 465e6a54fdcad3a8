use std::collections::BTreeSet;
use std::fmt::{self, Write};

use serde::Serialize;

use super::expr::{Binding, Literal, Term};
use super::synth::{Equation, EquationSet, Step};
use super::table::TruthTable;
use crate::circuit::CircuitGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Gates,
}

fn step_title(step: Step) -> &'static str {
    match step {
        Step::One => "internal variables from inputs",
        Step::Two => "outputs from inputs and internal variables",
        Step::Three => "backflow into internal variables",
        Step::Four => "backflow into inputs",
    }
}

fn target_name(eq: &Equation) -> String {
    if eq.step.is_backflow() {
        format!("{}r", eq.target)
    } else {
        eq.target.clone()
    }
}

/// Literals of a term in declaration order.
fn ordered_literals<'t>(graph: &CircuitGraph, term: &'t Term) -> Vec<&'t Literal> {
    let mut lits: Vec<&Literal> = term.iter().collect();
    lits.sort_by_key(|l| (graph.rank(&l.var).unwrap_or(usize::MAX), l.binding, &l.var));
    lits
}

/// Terms of an equation in display order: shorter first, then by
/// declaration rank, the target's own previous state last.
fn ordered_terms<'e>(graph: &CircuitGraph, eq: &'e Equation) -> Vec<&'e Term> {
    let mut terms: Vec<&Term> = eq.expr.terms().collect();
    terms.sort_by_key(|t| {
        let own = t.len() == 1 && t.iter().all(|l| l.var == eq.target && l.binding == Binding::Previous);
        let ranks: Vec<(usize, Binding)> = ordered_literals(graph, t)
            .iter()
            .map(|l| (graph.rank(&l.var).unwrap_or(usize::MAX), l.binding))
            .collect();
        (own, t.len(), ranks)
    });
    terms
}

fn term_text(graph: &CircuitGraph, term: &Term) -> String {
    ordered_literals(graph, term)
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(".")
}

/// One line such as `E3 = E1.E2 + E3p`. With `explain`, branches cut by a
/// check valve are shown as `G2.("0")`.
pub fn equation_text(graph: &CircuitGraph, eq: &Equation, explain: bool) -> String {
    let mut parts: Vec<String> = ordered_terms(graph, eq).into_iter().map(|t| term_text(graph, t)).collect();
    if explain {
        for p in &eq.pruned {
            let lits = term_text(graph, p);
            parts.push(if lits.is_empty() {
                "(\"0\")".to_string()
            } else {
                format!("{lits}.(\"0\")")
            });
        }
    }
    let rhs = if parts.is_empty() { "0".to_string() } else { parts.join(" + ") };
    format!("{} = {}", target_name(eq), rhs)
}

#[derive(Serialize)]
struct JsonEquation<'a> {
    target: &'a str,
    step: Step,
    terms: Vec<Vec<&'a Literal>>,
}

pub fn emit_equations(graph: &CircuitGraph, eqs: &EquationSet, steps: &[Step], format: Format, explain: bool) -> String {
    match format {
        Format::Text => {
            let mut out = String::new();
            for &step in steps {
                let _ = writeln!(out, "# {} step {}: {}", graph.name, step, step_title(step));
                for eq in eqs.step(step) {
                    out.push_str(&equation_text(graph, eq, explain));
                    out.push('\n');
                }
            }
            out
        }
        Format::Json => {
            let list: Vec<JsonEquation> = steps
                .iter()
                .flat_map(|&s| eqs.step(s))
                .map(|eq| JsonEquation {
                    target: &eq.target,
                    step: eq.step,
                    terms: ordered_terms(graph, eq)
                        .into_iter()
                        .map(|t| ordered_literals(graph, t))
                        .collect(),
                })
                .collect();
            let mut text = serde_json::to_string_pretty(&list).expect("equations serialize");
            text.push('\n');
            text
        }
        Format::Gates => gate_netlist(graph, eqs, steps).to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    And,
    Or,
    Buf,
    Const0,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Gate {
    pub kind: GateKind,
    pub output: String,
    pub inputs: Vec<String>,
}

/// Hardware form of a set of equations: AND/OR gates plus one D flip-flop
/// per variable read through its previous state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GateNetlist {
    pub name: String,
    pub inputs: Vec<String>,
    /// Variables latched each iteration; the flip-flop output is `<var>p`.
    pub flip_flops: Vec<String>,
    pub gates: Vec<Gate>,
}

impl GateNetlist {
    pub fn count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }
}

impl fmt::Display for GateNetlist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {} gate netlist", self.name)?;
        for i in &self.inputs {
            writeln!(f, "input {i}")?;
        }
        for v in &self.flip_flops {
            writeln!(f, "dff {v}p <- {v}")?;
        }
        for g in &self.gates {
            let kind = match g.kind {
                GateKind::And => "and",
                GateKind::Or => "or",
                GateKind::Buf => "buf",
                GateKind::Const0 => "const0",
            };
            write!(f, "{kind} {}", g.output)?;
            if !g.inputs.is_empty() {
                write!(f, " = {}", g.inputs.join(" "))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn gate_netlist(graph: &CircuitGraph, eqs: &EquationSet, steps: &[Step]) -> GateNetlist {
    let selected: Vec<&Equation> = steps.iter().flat_map(|&s| eqs.step(s)).collect();
    let driven: BTreeSet<String> = selected.iter().filter(|e| !e.step.is_backflow()).map(|e| e.target.clone()).collect();
    let mut inputs = Vec::new();
    let mut flip_flops = Vec::new();
    let mut gates = Vec::new();
    let mut next_net = 1;

    for eq in &selected {
        let mut nets = Vec::new();
        let terms = ordered_terms(graph, eq);
        for term in &terms {
            let lits: Vec<String> = ordered_literals(graph, term).iter().map(|l| l.to_string()).collect();
            for l in ordered_literals(graph, term) {
                match l.binding {
                    Binding::Previous if !flip_flops.contains(&l.var) => flip_flops.push(l.var.clone()),
                    Binding::Current if !driven.contains(&l.var) && !inputs.contains(&l.var) => {
                        inputs.push(l.var.clone())
                    }
                    _ => {}
                }
            }
            if lits.len() == 1 {
                nets.push(lits[0].clone());
            } else if terms.len() == 1 {
                nets.push(String::new());
                gates.push(Gate {
                    kind: GateKind::And,
                    output: target_name(eq),
                    inputs: lits,
                });
            } else {
                let net = format!("n{next_net}");
                next_net += 1;
                gates.push(Gate {
                    kind: GateKind::And,
                    output: net.clone(),
                    inputs: lits,
                });
                nets.push(net);
            }
        }
        match terms.len() {
            0 => gates.push(Gate {
                kind: GateKind::Const0,
                output: target_name(eq),
                inputs: Vec::new(),
            }),
            1 if nets[0].is_empty() => {}
            1 => gates.push(Gate {
                kind: GateKind::Buf,
                output: target_name(eq),
                inputs: nets,
            }),
            _ => gates.push(Gate {
                kind: GateKind::Or,
                output: target_name(eq),
                inputs: nets,
            }),
        }
    }
    inputs.sort_by_key(|v| graph.rank(v).unwrap_or(usize::MAX));
    flip_flops.sort_by_key(|v| graph.rank(v).unwrap_or(usize::MAX));
    GateNetlist {
        name: graph.name.clone(),
        inputs,
        flip_flops,
        gates,
    }
}

fn bit(b: bool) -> char {
    if b {
        '1'
    } else {
        '0'
    }
}

/// Tab-separated table, `0->1` for changed cells and `!` for flags. The
/// last column lists the steps that changed the row.
pub fn emit_table(table: &TruthTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}\tfrom step", table.columns.join("\t"));
    for row in &table.rows {
        for c in &row.cells {
            if c.initial != c.final_value {
                let _ = write!(out, "{}->{}", bit(c.initial), bit(c.final_value));
            } else {
                out.push(bit(c.final_value));
            }
            if c.flagged {
                out.push('!');
            }
            out.push('\t');
        }
        let steps: Vec<String> = row.steps.iter().map(|s| s.to_string()).collect();
        out.push_str(&steps.join(", "));
        out.push('\n');
    }
    out
}
