//! Interconnected block diagrams compiled from hybrid bond graphs.
//!
//! One diagram serves every mode. Each bond carries an effort wire and a flow
//! wire computed from the all-on causal assignment; bonds touching a switched
//! junction pass through a [`BlockKind::Switch`] that outputs zero while the
//! junction is off.

mod compile;
mod dot;
mod eval;

use std::collections::HashMap;

use thiserror::Error;

use crate::causality::{CausalAssignment, CausalityError};
use crate::expr::ArithOp;
use crate::model::BondGraph;
use crate::validate::Diagnostic;

pub use compile::{compile, compile_with_cap, DEFAULT_MODE_CAP};
pub use dot::{emit_dot, emit_graph_dot};
pub use eval::{evaluate_pass, junction_residuals, EvalError, JunctionResidual, Pass, PassValuation};

#[derive(Debug, Clone, PartialEq)]
pub enum BlockKind {
    /// Output is a state variable; derivative is `gain * input`.
    Integrator {
        element: String,
        gain: f64,
    },
    Gain {
        k: f64,
    },
    /// Signed sum of the inputs.
    Sum {
        signs: Vec<f64>,
    },
    Constant {
        value: f64,
    },
    SignalSource {
        signal: String,
    },
    /// Simulation time.
    Clock,
    /// Binary operation on two inputs.
    Arith {
        op: ArithOp,
    },
    /// Passes its input while switched junction `slot` is on, zero otherwise.
    Switch {
        junction: String,
        slot: usize,
    },
    Probe {
        label: String,
    },
}

impl BlockKind {
    pub fn type_name(&self) -> &'static str {
        match self {
            BlockKind::Integrator { .. } => "Integrator",
            BlockKind::Gain { .. } => "Gain",
            BlockKind::Sum { .. } => "Sum",
            BlockKind::Constant { .. } => "Constant",
            BlockKind::SignalSource { .. } => "SignalSource",
            BlockKind::Clock => "Clock",
            BlockKind::Arith { .. } => "Arith",
            BlockKind::Switch { .. } => "Switch",
            BlockKind::Probe { .. } => "Probe",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub kind: BlockKind,
    pub inputs: Vec<usize>,
}

/// Connection from the output of `from` to input `port` of `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Wire {
    pub from: usize,
    pub to: usize,
    pub port: usize,
}

#[derive(Debug, Clone)]
pub struct BlockDiagram {
    pub graph: BondGraph,
    /// Causality the diagram was built from (all switched junctions on).
    pub causality: CausalAssignment,
    pub blocks: Vec<Block>,
    /// Evaluation order of every block except integrators.
    pub schedule: Vec<usize>,
    /// Integrator blocks in state order.
    pub states: Vec<usize>,
    /// Block carrying each bond's effort, after switching.
    pub bond_effort: Vec<usize>,
    pub bond_flow: Vec<usize>,
    /// Probe blocks in declaration order.
    pub probes: Vec<usize>,
    pub(crate) vars: HashMap<String, (Option<usize>, Option<usize>)>,
}

impl BlockDiagram {
    pub fn wires(&self) -> Vec<Wire> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(to, b)| {
                b.inputs
                    .iter()
                    .enumerate()
                    .map(move |(port, &from)| Wire { from, to, port })
            })
            .collect()
    }

    pub fn count(&self, type_name: &str) -> usize {
        self.blocks.iter().filter(|b| b.kind.type_name() == type_name).count()
    }

    pub fn state_names(&self) -> Vec<String> {
        self.states.iter().map(|&i| self.blocks[i].name.clone()).collect()
    }

    pub fn probe_labels(&self) -> Vec<String> {
        self.graph.probes.iter().map(|p| p.label.clone()).collect()
    }

    pub fn mode_len(&self) -> usize {
        self.graph.switched_junctions().len()
    }

    /// Block giving `effort(name)`.
    pub fn effort_block(&self, name: &str) -> Option<usize> {
        self.vars.get(name).and_then(|v| v.0)
    }

    /// Block giving `flow(name)`.
    pub fn flow_block(&self, name: &str) -> Option<usize> {
        self.vars.get(name).and_then(|v| v.1)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("invalid model: {}", .0.first().map(|d| d.to_string()).unwrap_or_default())]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Causality(#[from] CausalityError),
    #[error("causality differs between modes (first in mode {mode}{})", .node.as_ref().map(|n| format!(" at `{n}`")).unwrap_or_default())]
    ModeDependentCausality { mode: String, node: Option<String> },
    #[error("algebraic loop through {}", .blocks.join(" -> "))]
    AlgebraicLoop { blocks: Vec<String> },
}
