//! Compile fluidic or electrical distribution circuits into sequential
//! Boolean equations and run them as an active digital twin.
//!
//! The pipeline is:
//!
//! 1. [`circuit`] parses a `.twn` netlist into a [`circuit::CircuitGraph`],
//!    normalizes joined pipe sections and validates the topology.
//! 2. [`logic`] synthesizes the four equation sets (forward fill of internal
//!    variables, forward fill of outputs, backflow into internal variables,
//!    backflow into inputs), evaluates them and enumerates truth tables.
//! 3. [`runtime`] executes the equations as a perpetual sequential loop,
//!    raising backflow warnings and emitting state words and events.
//! 4. [`link`] talks to the physical side, or to the built-in simulator
//!    with fault injection.
//! 5. [`diagnosis`] keeps the labeled history of state words and classifies
//!    model-versus-sensor mismatches.

pub mod bundled;
pub mod circuit;
pub mod diagnosis;
pub mod link;
pub mod logic;
pub mod runtime;

pub use circuit::{parse_netlist, CircuitGraph};
pub use logic::{synthesize, EquationSet};
pub use runtime::{Twin, TwinConfig};
