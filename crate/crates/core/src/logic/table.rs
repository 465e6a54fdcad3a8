use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use super::exec::{detect_backflows, forward_fixpoint};
use super::expr::{EvalError, State};
use super::project::{combinational_projection, ProjectionMode};
use super::synth::{EquationSet, Step};
use crate::circuit::{CircuitGraph, VarClass};

/// Largest number of free variables a table may enumerate.
pub const MAX_FREE_VARIABLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TableMode {
    /// Outputs from the series projection only.
    Unidirectional,
    /// Steps 1 and 2 to a fixpoint, then step 3.
    WithBackflowIv,
    /// As above, then step 4.
    WithBackflowInputs,
}

/// When internal variables flagged by step 3 take their new value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Step3Assignment {
    /// Before step 4 runs, as with automatic acknowledgment.
    Immediate,
    /// After step 4, as when the operator acknowledges later.
    #[default]
    Deferred,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("{0} free variables, at most {MAX_FREE_VARIABLES} can be enumerated")]
    TooManyVariables(usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub initial: bool,
    #[serde(rename = "final")]
    pub final_value: bool,
    /// Switched on by a backflow equation.
    pub flagged: bool,
    /// Last step that changed the value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Row {
    /// Values of the free variables, in [`TruthTable::free`] order.
    pub assignment: Vec<bool>,
    /// One cell per column.
    pub cells: Vec<Cell>,
    /// Steps that changed or flagged anything in this row.
    pub steps: BTreeSet<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TruthTable {
    pub mode: TableMode,
    pub free: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl TruthTable {
    /// Row for the given free-variable values, in any order.
    pub fn row(&self, assignment: &[(&str, bool)]) -> Option<&Row> {
        let wanted: Vec<bool> = self
            .free
            .iter()
            .map(|f| assignment.iter().find(|(v, _)| v == f).map(|(_, b)| *b))
            .collect::<Option<_>>()?;
        self.rows.iter().find(|r| r.assignment == wanted)
    }

    pub fn cell<'a>(&self, row: &'a Row, column: &str) -> Option<&'a Cell> {
        self.columns.iter().position(|c| c == column).map(|i| &row.cells[i])
    }
}

/// Enumerate every assignment of inputs, internal states and internal
/// variables. Outputs start from the series projection of the row.
pub fn enumerate_truth_table(
    graph: &CircuitGraph,
    eqs: &EquationSet,
    mode: TableMode,
    step3: Step3Assignment,
) -> Result<TruthTable, TableError> {
    let variables = graph.variables();
    let free: Vec<String> = variables
        .iter()
        .filter(|v| v.class != VarClass::Output)
        .map(|v| v.id.clone())
        .collect();
    if free.len() > MAX_FREE_VARIABLES {
        return Err(TableError::TooManyVariables(free.len()));
    }
    let columns: Vec<String> = variables.iter().map(|v| v.id.clone()).collect();
    let projection = combinational_projection(graph, eqs, ProjectionMode::Series);

    let mut rows = Vec::with_capacity(1 << free.len());
    for bits in 0u32..(1 << free.len()) {
        // first free variable is the least significant bit
        let assignment: Vec<bool> = (0..free.len()).map(|i| bits >> i & 1 == 1).collect();
        let mut initial: State = columns.iter().map(|c| (c.clone(), false)).collect();
        for (var, value) in free.iter().zip(&assignment) {
            initial.insert(var.clone(), *value);
        }
        for (out, expr) in &projection.outputs {
            let v = expr.eval(&initial, &initial)?;
            initial.insert(out.clone(), v);
        }

        let mut values = initial.clone();
        let mut step_of = BTreeMap::new();
        let mut flagged = BTreeSet::new();
        let mut steps = BTreeSet::new();
        if mode != TableMode::Unidirectional {
            let fp = forward_fixpoint(eqs, &mut values, &initial)?;
            for c in &fp.changes {
                step_of.insert(c.var.clone(), c.step);
                steps.insert(c.step);
            }
            let iv = detect_backflows(eqs, Step::Three, &values, &initial)?;
            let mut deferred = Vec::new();
            for b in &iv {
                flagged.insert(b.target.clone());
                step_of.insert(b.target.clone(), Step::Three);
                steps.insert(Step::Three);
                match step3 {
                    Step3Assignment::Immediate => {
                        values.insert(b.target.clone(), true);
                    }
                    Step3Assignment::Deferred => deferred.push(b.target.clone()),
                }
            }
            if mode == TableMode::WithBackflowInputs {
                for b in detect_backflows(eqs, Step::Four, &values, &initial)? {
                    flagged.insert(b.target.clone());
                    step_of.insert(b.target.clone(), Step::Four);
                    steps.insert(Step::Four);
                    values.insert(b.target, true);
                }
            }
            for t in deferred {
                values.insert(t, true);
            }
        }

        let cells = columns
            .iter()
            .map(|c| Cell {
                initial: initial[c],
                final_value: values[c],
                flagged: flagged.contains(c),
                step: if initial[c] != values[c] || flagged.contains(c) {
                    step_of.get(c).copied()
                } else {
                    None
                },
            })
            .collect();
        rows.push(Row {
            assignment,
            cells,
            steps,
        });
    }
    Ok(TruthTable {
        mode,
        free,
        columns,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::circuit::{normalize, parse_netlist};
    use crate::logic::synthesize;

    fn table(mode: TableMode) -> TruthTable {
        let g = normalize(parse_netlist(bundled::CIRCUIT1).unwrap()).unwrap();
        enumerate_truth_table(&g, &synthesize(&g), mode, Step3Assignment::Deferred).unwrap()
    }

    fn row(t: &TruthTable, f1: bool, e4: bool, e3: bool, e2: bool, e1: bool) -> &Row {
        t.row(&[("F1", f1), ("E4", e4), ("E3", e3), ("E2", e2), ("E1", e1)]).unwrap()
    }

    #[test]
    fn all_zero_row_stays_zero() {
        for mode in [TableMode::Unidirectional, TableMode::WithBackflowIv, TableMode::WithBackflowInputs] {
            let t = table(mode);
            let r = row(&t, false, false, false, false, false);
            assert!(r.cells.iter().all(|c| !c.initial && !c.final_value && !c.flagged));
            assert!(r.steps.is_empty());
        }
    }

    #[test]
    fn s2_backflows_into_e3() {
        let t = table(TableMode::WithBackflowIv);
        let r = row(&t, true, true, false, false, false);
        let e3 = t.cell(r, "E3").unwrap();
        assert!(!e3.initial && e3.final_value && e3.flagged);
        assert_eq!(e3.step, Some(Step::Three));
        assert_eq!(r.steps, BTreeSet::from([Step::Three]));
    }

    #[test]
    fn return_flow_into_e1() {
        let t = table(TableMode::WithBackflowInputs);
        let r = row(&t, false, false, true, true, false);
        let e1 = t.cell(r, "E1").unwrap();
        assert!(e1.flagged && e1.final_value);
    }

    #[test]
    fn too_many_variables() {
        let mut text = String::from("circuit big\n");
        for i in 0..17 {
            text.push_str(&format!("source s{i}\n"));
        }
        let g = normalize(parse_netlist(&text).unwrap()).unwrap();
        let err = enumerate_truth_table(&g, &synthesize(&g), TableMode::Unidirectional, Step3Assignment::Deferred);
        assert_eq!(err.unwrap_err(), TableError::TooManyVariables(17));
    }
}
