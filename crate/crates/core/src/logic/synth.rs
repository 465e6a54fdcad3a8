use std::fmt;

use serde::{Deserialize, Serialize};

use super::expr::{BoolExpr, Literal, Term};
use super::paths::{enumerate_paths, PathMode, PathTerm};
use crate::circuit::{CircuitGraph, Role, Segment, SegmentKind};

/// Synthesis step producing an equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Step {
    /// Internal variables from inputs.
    One,
    /// Outputs from inputs and internal variables.
    Two,
    /// Backflow into internal variables.
    Three,
    /// Backflow into inputs.
    Four,
}

impl Step {
    pub const ALL: [Step; 4] = [Step::One, Step::Two, Step::Three, Step::Four];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn is_backflow(self) -> bool {
        matches!(self, Step::Three | Step::Four)
    }
}

impl From<Step> for u8 {
    fn from(s: Step) -> u8 {
        s.number()
    }
}

impl TryFrom<u8> for Step {
    type Error = String;

    fn try_from(n: u8) -> Result<Self, Self::Error> {
        match n {
            1 => Ok(Step::One),
            2 => Ok(Step::Two),
            3 => Ok(Step::Three),
            4 => Ok(Step::Four),
            _ => Err(format!("no step {n}")),
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equation {
    pub target: String,
    pub step: Step,
    pub expr: BoolExpr,
    /// Branches cut by a check valve: literals met before the valve.
    #[serde(skip)]
    pub pruned: Vec<Term>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EquationSet {
    pub step1: Vec<Equation>,
    pub step2: Vec<Equation>,
    pub step3: Vec<Equation>,
    pub step4: Vec<Equation>,
}

impl EquationSet {
    pub fn step(&self, step: Step) -> &[Equation] {
        match step {
            Step::One => &self.step1,
            Step::Two => &self.step2,
            Step::Three => &self.step3,
            Step::Four => &self.step4,
        }
    }

    pub fn get(&self, step: Step, target: &str) -> Option<&Equation> {
        self.step(step).iter().find(|e| e.target == target)
    }

    pub fn all(&self) -> impl Iterator<Item = &Equation> {
        Step::ALL.into_iter().flat_map(move |s| self.step(s).iter())
    }
}

fn binding_for(graph: &CircuitGraph, var: &str, step: Step) -> Literal {
    let role = graph.role_of(var);
    if step == Step::Three && role == Some(Role::InternalVariable) {
        Literal::previous(var)
    } else {
        Literal::current(var)
    }
}

fn build(graph: &CircuitGraph, target: &Segment, step: Step, mode: PathMode, terminals: &[Role]) -> Equation {
    let mut expr = BoolExpr::falsity();
    let mut pruned = Vec::new();
    for path in enumerate_paths(graph, &target.id, mode, &Role::ALL) {
        let term = path_term(graph, &path, step);
        if path.is_blocked() {
            pruned.push(term);
            continue;
        }
        let role = path.terminal().and_then(|t| graph.role_of(t));
        if role.is_some_and(|r| terminals.contains(&r)) {
            expr.add_term(term);
        }
    }
    let memory = matches!(step, Step::One | Step::Two) && !target.memoryless;
    if memory {
        expr.add_term(Term::from([Literal::previous(&target.id)]));
    }
    Equation {
        target: target.id.clone(),
        step,
        expr,
        pruned,
    }
}

fn path_term(graph: &CircuitGraph, path: &PathTerm, step: Step) -> Term {
    path.actuators
        .iter()
        .map(Literal::current)
        .chain(path.segments.iter().map(|s| binding_for(graph, s, step)))
        .collect()
}

fn targets(graph: &CircuitGraph, role: Role, backflow: bool) -> impl Iterator<Item = &Segment> {
    graph
        .segments_with_role(role)
        .filter(move |s| !(backflow && s.kind == SegmentKind::Signal))
}

/// Internal variables filled from inputs and other internal variables.
pub fn synth_step1(graph: &CircuitGraph) -> Vec<Equation> {
    targets(graph, Role::InternalVariable, false)
        .map(|t| build(graph, t, Step::One, PathMode::ForwardToInputs, &[Role::Input, Role::InternalVariable]))
        .collect()
}

/// Outputs filled from inputs, internal variables and upstream outputs.
pub fn synth_step2(graph: &CircuitGraph) -> Vec<Equation> {
    targets(graph, Role::Output, false)
        .map(|t| build(graph, t, Step::Two, PathMode::ForwardToInputs, &Role::ALL))
        .collect()
}

/// Internal variables refilled by backflow from outputs and other internal
/// variables. Signal lines flow one way and get no equation.
pub fn synth_step3(graph: &CircuitGraph) -> Vec<Equation> {
    targets(graph, Role::InternalVariable, true)
        .map(|t| build(graph, t, Step::Three, PathMode::Backflow, &[Role::Output, Role::InternalVariable]))
        .collect()
}

/// Return flow into inputs from internal variables and outputs.
pub fn synth_step4(graph: &CircuitGraph) -> Vec<Equation> {
    targets(graph, Role::Input, true)
        .map(|t| build(graph, t, Step::Four, PathMode::Backflow, &[Role::Output, Role::InternalVariable]))
        .collect()
}

/// All four equation sets of a normalized graph.
pub fn synthesize(graph: &CircuitGraph) -> EquationSet {
    EquationSet {
        step1: synth_step1(graph),
        step2: synth_step2(graph),
        step3: synth_step3(graph),
        step4: synth_step4(graph),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::circuit::{normalize, parse_netlist};
    use crate::logic::expr::Binding;

    fn eqs(text: &str) -> EquationSet {
        synthesize(&normalize(parse_netlist(text).unwrap()).unwrap())
    }

    fn lits(set: &EquationSet, step: Step, target: &str) -> Vec<Vec<String>> {
        let mut v: Vec<Vec<String>> = set
            .get(step, target)
            .unwrap()
            .expr
            .terms()
            .map(|t| t.iter().map(|l| l.to_string()).collect())
            .collect();
        v.sort();
        v
    }

    #[test]
    fn circuit1_steps() {
        let e = eqs(bundled::CIRCUIT1);
        assert_eq!(lits(&e, Step::One, "E3"), [vec!["E1", "E2"], vec!["E3p"]]);
        assert_eq!(lits(&e, Step::Two, "S1"), [vec!["E3"], vec!["S1p"]]);
        assert_eq!(lits(&e, Step::Three, "E3"), [vec!["E4", "S2"], vec!["S1"]]);
        assert_eq!(lits(&e, Step::Four, "F1"), [vec!["S2"]]);
    }

    #[test]
    fn g1_return_flow_is_cut_by_the_check_valve() {
        let e = eqs(bundled::CIRCUIT2);
        let g1 = e.get(Step::Four, "G1").unwrap();
        assert!(g1.expr.is_false());
        assert_eq!(g1.pruned, vec![Term::from([Literal::current("G2")])]);
    }

    #[test]
    fn step3_binds_internal_variables_to_previous() {
        let e = eqs(bundled::CIRCUIT2);
        let h = e.get(Step::Three, "E3").unwrap();
        let h1 = h.expr.literals().find(|l| l.var == "H1").unwrap();
        assert_eq!(h1.binding, Binding::Previous);
        let s1 = h.expr.literals().find(|l| l.var == "S1").unwrap();
        assert_eq!(s1.binding, Binding::Current);
    }

    #[test]
    fn signal_lines_have_no_memory_and_no_backflow() {
        let e = eqs(bundled::CIS);
        assert_eq!(lits(&e, Step::One, "MFIA_out"), [vec!["PC_CIS", "SWP_on"]]);
        assert!(e.get(Step::Three, "MFIA_out").is_none());
        assert!(e.get(Step::Four, "PC_CIS").is_none());
    }

    #[test]
    fn step_numbers_serialize_as_integers() {
        assert_eq!(serde_json::to_string(&Step::Three).unwrap(), "3");
        assert_eq!(serde_json::from_str::<Step>("2").unwrap(), Step::Two);
        assert!(serde_json::from_str::<Step>("7").is_err());
    }
}
