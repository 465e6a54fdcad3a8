use serde::Serialize;

use super::expr::{EvalError, State};
use super::synth::{EquationSet, Step};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Change {
    pub var: String,
    pub from: bool,
    pub to: bool,
    pub step: Step,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Fixpoint {
    /// Passes over steps 1 and 2, the last one changing nothing.
    pub passes: usize,
    pub converged: bool,
    pub changes: Vec<Change>,
}

/// Repeat steps 1 then 2 until nothing changes. Each equation writes its
/// target straight away, so later equations of the same pass see it.
/// Gives up after one pass more than there are variables in `values`.
pub fn forward_fixpoint(eqs: &EquationSet, values: &mut State, previous: &State) -> Result<Fixpoint, EvalError> {
    let cap = values.len() + 1;
    let mut out = Fixpoint::default();
    while out.passes < cap {
        out.passes += 1;
        let mut changed = false;
        for eq in eqs.step1.iter().chain(&eqs.step2) {
            let value = eq.expr.eval(values, previous)?;
            let slot = values.entry(eq.target.clone()).or_default();
            if *slot != value {
                out.changes.push(Change {
                    var: eq.target.clone(),
                    from: *slot,
                    to: value,
                    step: eq.step,
                });
                *slot = value;
                changed = true;
            }
        }
        if !changed {
            out.converged = true;
            break;
        }
    }
    Ok(out)
}

/// Result of a backflow equation whose target is currently off.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Backflow {
    pub target: String,
    pub step: Step,
    /// Terms that evaluated true, rendered as text.
    pub sources: Vec<String>,
}

/// Evaluate the step 3 or step 4 equations without assigning anything.
/// Returns the targets that would switch on.
pub fn detect_backflows(
    eqs: &EquationSet,
    step: Step,
    current: &State,
    previous: &State,
) -> Result<Vec<Backflow>, EvalError> {
    let mut out = Vec::new();
    for eq in eqs.step(step) {
        if current.get(&eq.target).copied().unwrap_or(false) {
            continue;
        }
        let mut sources = Vec::new();
        for term in eq.expr.terms() {
            let single = super::expr::BoolExpr::from_terms([term.clone()]);
            if single.eval(current, previous)? {
                sources.push(
                    term.iter()
                        .map(|l| l.to_string())
                        .collect::<Vec<_>>()
                        .join("."),
                );
            }
        }
        if !sources.is_empty() {
            out.push(Backflow {
                target: eq.target.clone(),
                step,
                sources,
            });
        }
    }
    Ok(out)
}
