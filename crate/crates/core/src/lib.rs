//! Hybrid bond graph modeling and simulation.
//!
//! The pipeline is: text model ([`dsl`]) → validated [`model::BondGraph`] →
//! causal analysis over every mode ([`causality`]) → one intermediate block
//! diagram with switch blocks ([`ibd`]) → fixed-step hybrid simulation
//! ([`sim`]). [`bench`] holds the three-tank benchmark and its independent
//! piecewise-linear oracle.

pub mod bench;
pub mod causality;
pub mod dsl;
pub mod expr;
pub mod ibd;
pub mod model;
pub mod sim;
pub mod validate;

pub use causality::{assign_causality, check_all_modes, CausalAssignment, CausalityError};
pub use dsl::{parse_model, serialize_model, ParseError, ParseErrorKind, SourceSpan};
pub use expr::{eval_guard, step_automaton, GuardExpr, NumExpr, Valuation, VarRef};
pub use ibd::{compile, emit_dot, evaluate_pass, BlockDiagram, CompileError};
pub use model::{initial_mode, BondGraph, Mode};
pub use sim::{simulate, IntegratorKind, SimConfig, SimError, SimTrace};
pub use validate::{validate_graph, Diagnostic, DiagnosticKind};
