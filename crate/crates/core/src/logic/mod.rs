//! Sequential Boolean equations of a circuit.
//!
//! Four equation sets are synthesized from a normalized graph:
//!
//! 1. internal variables filled from inputs, `E3 = E1.E2 + E3p`;
//! 2. outputs filled from inputs and internal variables, `S1 = E3 + S1p`;
//! 3. internal variables refilled by backflow, `E3r = S1 + E4.S2`;
//! 4. inputs reached by a return flow, `E1r = E2.E3`.
//!
//! Steps 1 and 2 keep the target's previous state (`p` suffix) unless the
//! target is a signal line. Steps 3 and 4 never do and ignore inputs.

mod emit;
mod exec;
mod expr;
mod paths;
mod project;
mod synth;
mod table;

pub use emit::{emit_equations, emit_table, equation_text, gate_netlist, Format, Gate, GateKind, GateNetlist};
pub use exec::{detect_backflows, forward_fixpoint, Backflow, Change, Fixpoint};
pub use expr::{eval_expr, Binding, BoolExpr, EvalError, Literal, State, Term};
pub use paths::{enumerate_paths, PathMode, PathTerm, Traversal};
pub use project::{combinational_projection, Projection, ProjectionMode};
pub use synth::{synth_step1, synth_step2, synth_step3, synth_step4, synthesize, Equation, EquationSet, Step};
pub use table::{enumerate_truth_table, Cell, Row, Step3Assignment, TableError, TableMode, TruthTable, MAX_FREE_VARIABLES};
