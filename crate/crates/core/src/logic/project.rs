use serde::Serialize;

use super::expr::{Binding, BoolExpr, Literal, Term};
use super::paths::{enumerate_paths, PathMode};
use super::synth::EquationSet;
use crate::circuit::{CircuitGraph, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    /// Replace internal variables by their step 1 right-hand side. Their
    /// own previous state stays as a free literal.
    Substitute,
    /// Treat each branch from a source to the output as one series chain,
    /// every section crossed on the way being a factor.
    Series,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection {
    /// One expression per output, in declaration order. All literals bind
    /// the current value.
    pub outputs: Vec<(String, BoolExpr)>,
    /// Internal variables whose substitution loops back on itself.
    pub cycles: Vec<Vec<String>>,
}

impl Projection {
    pub fn get(&self, output: &str) -> Option<&BoolExpr> {
        self.outputs.iter().find(|(o, _)| o == output).map(|(_, e)| e)
    }
}

/// Combinational view of the outputs, ignoring memory and backflow.
pub fn combinational_projection(graph: &CircuitGraph, eqs: &EquationSet, mode: ProjectionMode) -> Projection {
    match mode {
        ProjectionMode::Series => Projection {
            outputs: graph
                .segments_with_role(Role::Output)
                .map(|s| (s.id.clone(), series(graph, &s.id)))
                .collect(),
            cycles: Vec::new(),
        },
        ProjectionMode::Substitute => {
            let mut cycles = Vec::new();
            let outputs = eqs
                .step2
                .iter()
                .map(|eq| {
                    let mut stack = Vec::new();
                    let expr = substitute(graph, eqs, &eq.expr, &eq.target, &mut stack, &mut cycles);
                    (eq.target.clone(), expr)
                })
                .collect();
            Projection { outputs, cycles }
        }
    }
}

fn series(graph: &CircuitGraph, output: &str) -> BoolExpr {
    let paths = enumerate_paths(graph, output, PathMode::ForwardToSources, PathMode::ForwardToSources.default_stops());
    BoolExpr::from_terms(
        paths
            .iter()
            .filter(|p| !p.is_blocked())
            .map(|p| p.actuators.iter().chain(&p.segments).map(Literal::current).collect()),
    )
}

fn substitute(
    graph: &CircuitGraph,
    eqs: &EquationSet,
    expr: &BoolExpr,
    owner: &str,
    stack: &mut Vec<String>,
    cycles: &mut Vec<Vec<String>>,
) -> BoolExpr {
    let mut out = BoolExpr::falsity();
    for term in expr.terms() {
        let mut product = BoolExpr::from_terms([Term::new()]);
        for lit in term {
            let factor = match lit.binding {
                // own memory becomes the free variable itself; other
                // outputs' memory is dropped
                Binding::Previous if lit.var == owner && graph.role_of(owner) == Some(Role::InternalVariable) => {
                    BoolExpr::literal(Literal::current(&lit.var))
                }
                Binding::Previous => BoolExpr::falsity(),
                Binding::Current => expand(graph, eqs, &lit.var, stack, cycles),
            };
            product = product.and(&factor);
        }
        out = out.or(&product);
    }
    out
}

fn expand(
    graph: &CircuitGraph,
    eqs: &EquationSet,
    var: &str,
    stack: &mut Vec<String>,
    cycles: &mut Vec<Vec<String>>,
) -> BoolExpr {
    let free = BoolExpr::literal(Literal::current(var));
    if graph.role_of(var) != Some(Role::InternalVariable) {
        return free;
    }
    let Some(eq) = eqs.step1.iter().find(|e| e.target == var) else {
        return free;
    };
    if let Some(pos) = stack.iter().position(|s| s == var) {
        let cycle = stack[pos..].to_vec();
        if !cycles.contains(&cycle) {
            cycles.push(cycle);
        }
        return free;
    }
    stack.push(var.to_owned());
    let expr = substitute(graph, eqs, &eq.expr, var, stack, cycles);
    stack.pop();
    expr
}
