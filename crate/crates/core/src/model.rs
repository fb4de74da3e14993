//! Hybrid bond graph data model.
//!
//! A [`BondGraph`] holds the continuous bond graph, the switching automata of
//! its switched junctions (each [`ControlSpec`] lives inside its junction, so
//! the automaton-to-junction mapping is structural) and the auxiliary signal,
//! decision and probe declarations used by guards and by the simulator.

use std::fmt;

use crate::expr::{GuardExpr, NumExpr, VarRef};

/// Bond graph element kinds supported by the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    /// Capacitive storage (fluid capacity).
    C,
    /// Linear resistance.
    R,
    /// Inertance.
    I,
    /// Flow source.
    Sf,
    /// Modulated flow source.
    MSf,
    /// Effort source.
    Se,
}

impl ElementKind {
    pub const ALL: [ElementKind; 6] = [
        ElementKind::C,
        ElementKind::R,
        ElementKind::I,
        ElementKind::Sf,
        ElementKind::MSf,
        ElementKind::Se,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            ElementKind::C => "C",
            ElementKind::R => "R",
            ElementKind::I => "I",
            ElementKind::Sf => "Sf",
            ElementKind::MSf => "MSf",
            ElementKind::Se => "Se",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.keyword() == s)
    }

    pub fn is_storage(self) -> bool {
        matches!(self, ElementKind::C | ElementKind::I)
    }

    pub fn is_source(self) -> bool {
        matches!(self, ElementKind::Sf | ElementKind::MSf | ElementKind::Se)
    }

    /// Passive elements take the power entering them as positive.
    pub fn is_passive(self) -> bool {
        matches!(self, ElementKind::C | ElementKind::R | ElementKind::I)
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Constitutive parameter of an element.
#[derive(Debug, Clone, PartialEq)]
pub enum Parameter {
    Constant(f64),
    /// Value read from a piecewise-constant signal.
    Signal(String),
    /// Arbitrary arithmetic over model variables (modulated sources).
    Modulation(NumExpr),
}

impl Parameter {
    /// Parameter for an expression, in the form the parser produces: a bare
    /// number is a constant and a bare signal reference is a signal.
    pub fn from_expr(e: NumExpr) -> Self {
        match e {
            NumExpr::Const(v) => Parameter::Constant(v),
            NumExpr::Var(VarRef::Signal(s)) => Parameter::Signal(s),
            e => Parameter::Modulation(e),
        }
    }

    /// All variables the parameter reads.
    pub fn references(&self) -> Vec<VarRef> {
        match self {
            Parameter::Constant(_) => Vec::new(),
            Parameter::Signal(s) => vec![VarRef::Signal(s.clone())],
            Parameter::Modulation(e) => e.references(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub kind: ElementKind,
    pub parameter: Parameter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JunctionKind {
    /// Common effort, flows sum to zero.
    Zero,
    /// Common flow, efforts sum to zero.
    One,
}

impl JunctionKind {
    pub fn symbol(self) -> &'static str {
        match self {
            JunctionKind::Zero => "0",
            JunctionKind::One => "1",
        }
    }
}

/// State of a two-state junction automaton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SwitchState {
    Off,
    On,
}

impl SwitchState {
    pub fn is_on(self) -> bool {
        self == SwitchState::On
    }

    pub fn keyword(self) -> &'static str {
        match self {
            SwitchState::Off => "off",
            SwitchState::On => "on",
        }
    }
}

impl From<bool> for SwitchState {
    fn from(on: bool) -> Self {
        if on {
            SwitchState::On
        } else {
            SwitchState::Off
        }
    }
}

/// Two-state control specification of a switched junction.
///
/// Only the guard leaving the current state is ever consulted: `on_guard`
/// while off, `off_guard` while on.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSpec {
    pub on_guard: GuardExpr,
    pub off_guard: GuardExpr,
    pub initial_state: SwitchState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Junction {
    pub name: String,
    pub kind: JunctionKind,
    pub switched: bool,
    pub cspec: Option<ControlSpec>,
}

impl Junction {
    pub fn plain(name: impl Into<String>, kind: JunctionKind) -> Self {
        Junction {
            name: name.into(),
            kind,
            switched: false,
            cspec: None,
        }
    }

    pub fn switched(name: impl Into<String>, kind: JunctionKind, cspec: ControlSpec) -> Self {
        Junction {
            name: name.into(),
            kind,
            switched: true,
            cspec: Some(cspec),
        }
    }
}

/// A bond; `from -> to` fixes the positive power direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bond {
    pub name: String,
    pub from: String,
    pub to: String,
}

/// Piecewise-constant signal: `(t_start, value)` breakpoints, strictly
/// increasing in time. The signal is 0 before its first breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalDef {
    pub name: String,
    pub breakpoints: Vec<(f64, f64)>,
}

impl SignalDef {
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&(start, _)| start <= t);
        if idx == 0 {
            0.0
        } else {
            self.breakpoints[idx - 1].1
        }
    }
}

/// Named boolean expression shared between control specifications.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionDef {
    pub name: String,
    pub guard: GuardExpr,
}

/// A recorded variable with its trace label.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub label: String,
    pub var: VarRef,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BondGraph {
    pub name: String,
    pub elements: Vec<Element>,
    pub junctions: Vec<Junction>,
    pub bonds: Vec<Bond>,
    pub signals: Vec<SignalDef>,
    pub decisions: Vec<DecisionDef>,
    pub probes: Vec<Probe>,
}

/// Reference to a node of the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRef {
    Element(usize),
    Junction(usize),
}

impl BondGraph {
    pub fn new(name: impl Into<String>) -> Self {
        BondGraph {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn element(&self, name: &str) -> Option<usize> {
        self.elements.iter().position(|e| e.name == name)
    }

    pub fn junction(&self, name: &str) -> Option<usize> {
        self.junctions.iter().position(|j| j.name == name)
    }

    pub fn bond(&self, name: &str) -> Option<usize> {
        self.bonds.iter().position(|b| b.name == name)
    }

    pub fn signal(&self, name: &str) -> Option<&SignalDef> {
        self.signals.iter().find(|s| s.name == name)
    }

    pub fn decision(&self, name: &str) -> Option<&DecisionDef> {
        self.decisions.iter().find(|d| d.name == name)
    }

    pub fn node(&self, name: &str) -> Option<NodeRef> {
        self.element(name)
            .map(NodeRef::Element)
            .or_else(|| self.junction(name).map(NodeRef::Junction))
    }

    pub fn node_name(&self, node: NodeRef) -> &str {
        match node {
            NodeRef::Element(i) => &self.elements[i].name,
            NodeRef::Junction(i) => &self.junctions[i].name,
        }
    }

    /// Indices of switched junctions in declaration order; position in this
    /// list is the junction's slot in a [`Mode`].
    pub fn switched_junctions(&self) -> Vec<usize> {
        self.junctions
            .iter()
            .enumerate()
            .filter(|(_, j)| j.switched)
            .map(|(i, _)| i)
            .collect()
    }

    /// Slot of junction `j` in the mode vector, if it is switched.
    pub fn switch_slot(&self, junction: usize) -> Option<usize> {
        if !self.junctions.get(junction)?.switched {
            return None;
        }
        Some(self.junctions[..junction].iter().filter(|j| j.switched).count())
    }

    /// Bonds incident to a node, in declaration order.
    pub fn incident_bonds(&self, node: NodeRef) -> Vec<usize> {
        let name = self.node_name(node);
        self.bonds
            .iter()
            .enumerate()
            .filter(|(_, b)| b.from == name || b.to == name)
            .map(|(i, _)| i)
            .collect()
    }

    /// Storage elements (C and I) in declaration order. This is the state
    /// vector ordering used by the compiler and simulator.
    pub fn storages(&self) -> Vec<usize> {
        self.elements
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kind.is_storage())
            .map(|(i, _)| i)
            .collect()
    }
}

/// System mode: one on/off bit per switched junction, in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Mode(pub Vec<bool>);

impl Mode {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn all_on(n: usize) -> Self {
        Mode(vec![true; n])
    }

    /// Mode number `index` of `n` junctions; the first junction is the most
    /// significant bit.
    pub fn from_index(index: u64, n: usize) -> Self {
        Mode((0..n).map(|j| (index >> (n - 1 - j)) & 1 == 1).collect())
    }

    pub fn index(&self) -> u64 {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn bit(&self, slot: usize) -> bool {
        self.0[slot]
    }

    /// Number of distinct modes for `n` switched junctions, if it fits.
    pub fn count(n: usize) -> Option<u64> {
        1u64.checked_shl(n as u32).filter(|_| n < 64)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Mode a valid graph starts in: every automaton in its initial state.
pub fn initial_mode(g: &BondGraph) -> Mode {
    Mode(
        g.junctions
            .iter()
            .filter(|j| j.switched)
            .map(|j| j.cspec.as_ref().is_some_and(|c| c.initial_state.is_on()))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_is_piecewise_constant_and_zero_before_start() {
        let s = SignalDef {
            name: "s".into(),
            breakpoints: vec![(1.0, 2.0), (3.0, -1.0)],
        };
        assert_eq!(s.value_at(0.5), 0.0);
        assert_eq!(s.value_at(1.0), 2.0);
        assert_eq!(s.value_at(2.999), 2.0);
        assert_eq!(s.value_at(3.0), -1.0);
        assert_eq!(s.value_at(100.0), -1.0);
    }

    #[test]
    fn mode_index_is_msb_first() {
        let m = Mode(vec![true, false, true]);
        assert_eq!(m.index(), 0b101);
        assert_eq!(Mode::from_index(0b101, 3), m);
        assert_eq!(m.to_string(), "101");
        assert_eq!(Mode::count(6), Some(64));
        assert_eq!(Mode::count(64), None);
    }

    #[test]
    fn no_switched_junctions_gives_empty_mode() {
        let mut g = BondGraph::new("m");
        g.junctions.push(Junction::plain("j", JunctionKind::Zero));
        assert!(initial_mode(&g).is_empty());
    }
}
