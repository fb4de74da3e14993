//! Computational causality.
//!
//! Assignment is sequential: sources first, then storages in integral
//! causality, then resistors, then any junction-to-junction bond still free,
//! each followed by propagation of the junction constraints (a 0-junction
//! receives effort on exactly one bond, a 1-junction imposes effort on exactly
//! one bond). All choices run in declaration order so the result depends only
//! on the graph and the mode. Bonds touching an off junction are inactive and
//! take no part.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::model::{BondGraph, ElementKind, JunctionKind, Mode, NodeRef};

/// Which end of a bond imposes effort on it. The other end imposes flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondEnd {
    From,
    To,
}

impl BondEnd {
    pub fn opposite(self) -> Self {
        match self {
            BondEnd::From => BondEnd::To,
            BondEnd::To => BondEnd::From,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementClass {
    /// Element whose bond is inactive in this mode.
    Inactive,
    IntegralStorage,
    /// Never produced: derivative causality is reported as an error.
    DerivativeStorage,
    Resistive,
    Source,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CausalityError {
    #[error("causal conflict at `{node}`")]
    CausalConflict { node: String },
    #[error("storage `{node}` cannot keep integral causality")]
    DerivativeCausality { node: String },
    #[error("mode has {got} entries but the graph has {expected} switched junctions")]
    ModeLength { expected: usize, got: usize },
    #[error("{switched} switched junctions give 2^{switched} modes, above the cap of {cap}")]
    TooManyModes { switched: usize, cap: u64 },
}

impl CausalityError {
    /// Offending node, for conflicts.
    pub fn node(&self) -> Option<&str> {
        match self {
            CausalityError::CausalConflict { node } | CausalityError::DerivativeCausality { node } => Some(node),
            _ => None,
        }
    }
}

/// Causality of every bond in one mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalAssignment {
    pub mode: Mode,
    /// Effort-imposing end per bond; `None` for inactive bonds.
    pub bonds: Vec<Option<BondEnd>>,
    pub elements: Vec<ElementClass>,
}

impl CausalAssignment {
    pub fn is_active(&self, bond: usize) -> bool {
        self.bonds[bond].is_some()
    }

    /// Whether `node` imposes effort on `bond`.
    pub fn imposes_effort(&self, g: &BondGraph, bond: usize, node: NodeRef) -> Option<bool> {
        let end = self.bonds[bond]?;
        let b = &g.bonds[bond];
        let name = g.node_name(node);
        Some(match end {
            BondEnd::From => b.from == name,
            BondEnd::To => b.to == name,
        })
    }

    /// Bonds on which active junction `j` receives effort (0-junction) or
    /// imposes effort (1-junction), i.e. the bonds that fix its common
    /// variable. Exactly one for a consistent assignment.
    pub fn determining_bonds(&self, g: &BondGraph, j: usize) -> Vec<usize> {
        let node = NodeRef::Junction(j);
        g.incident_bonds(node)
            .into_iter()
            .filter(|&b| match self.imposes_effort(g, b, node) {
                None => false,
                Some(imposes) => match g.junctions[j].kind {
                    JunctionKind::Zero => !imposes,
                    JunctionKind::One => imposes,
                },
            })
            .collect()
    }
}

struct Assigner<'g> {
    g: &'g BondGraph,
    active: Vec<bool>,
    junction_on: Vec<bool>,
    assigned: Vec<Option<BondEnd>>,
    /// bond -> (from node, to node)
    ends: Vec<(NodeRef, NodeRef)>,
    junction_bonds: Vec<Vec<usize>>,
    queue: VecDeque<usize>,
}

impl Assigner<'_> {
    fn node_end(&self, bond: usize, node: NodeRef) -> BondEnd {
        if self.ends[bond].0 == node {
            BondEnd::From
        } else {
            BondEnd::To
        }
    }

    fn set(&mut self, bond: usize, end: BondEnd, culprit: NodeRef) -> Result<(), CausalityError> {
        match self.assigned[bond] {
            Some(e) if e == end => Ok(()),
            Some(_) => Err(self.conflict(culprit)),
            None => {
                self.assigned[bond] = Some(end);
                let (a, b) = self.ends[bond];
                for n in [a, b] {
                    if let NodeRef::Junction(j) = n {
                        self.queue.push_back(j);
                    }
                }
                Ok(())
            }
        }
    }

    fn conflict(&self, node: NodeRef) -> CausalityError {
        CausalityError::CausalConflict {
            node: self.g.node_name(node).to_string(),
        }
    }

    fn propagate(&mut self) -> Result<(), CausalityError> {
        while let Some(j) = self.queue.pop_front() {
            if !self.junction_on[j] {
                continue;
            }
            let node = NodeRef::Junction(j);
            let bonds = self.junction_bonds[j].clone();
            // effort imposed by this junction vs. received
            let mut imposes = 0;
            let mut receives = 0;
            let mut free = Vec::new();
            for &b in &bonds {
                match self.assigned[b] {
                    None => free.push(b),
                    Some(end) if end == self.node_end(b, node) => imposes += 1,
                    Some(_) => receives += 1,
                }
            }
            // the count that must equal exactly one
            let (fixed, forced_out) = match self.g.junctions[j].kind {
                JunctionKind::Zero => (receives, true),
                JunctionKind::One => (imposes, false),
            };
            // `forced_out`: once fixed, the junction imposes effort on the rest
            let rest_end = |s: &Self, b: usize| {
                let here = s.node_end(b, node);
                if forced_out {
                    here
                } else {
                    here.opposite()
                }
            };
            match (fixed, free.len()) {
                (f, _) if f > 1 => return Err(self.conflict(node)),
                (1, _) => {
                    for b in free {
                        let end = rest_end(self, b);
                        self.set(b, end, node)?;
                    }
                }
                (0, 1) => {
                    let b = free[0];
                    let end = rest_end(self, b).opposite();
                    self.set(b, end, node)?;
                }
                (0, 0) if !bonds.is_empty() => return Err(self.conflict(node)),
                _ => {}
            }
        }
        Ok(())
    }
}

/// Assigns causality to every active bond of `g` in `mode`.
pub fn assign_causality(g: &BondGraph, mode: &Mode) -> Result<CausalAssignment, CausalityError> {
    let switched = g.switched_junctions();
    if mode.len() != switched.len() {
        return Err(CausalityError::ModeLength {
            expected: switched.len(),
            got: mode.len(),
        });
    }
    let mut junction_on = vec![true; g.junctions.len()];
    for (slot, &j) in switched.iter().enumerate() {
        junction_on[j] = mode.bit(slot);
    }
    let resolve = |name: &str| g.node(name).expect("assign_causality requires a validated graph");
    let ends: Vec<(NodeRef, NodeRef)> = g.bonds.iter().map(|b| (resolve(&b.from), resolve(&b.to))).collect();
    let is_off = |n: NodeRef| matches!(n, NodeRef::Junction(j) if !junction_on[j]);
    let active: Vec<bool> = ends.iter().map(|&(a, b)| !is_off(a) && !is_off(b)).collect();
    let junction_bonds = (0..g.junctions.len())
        .map(|j| {
            g.incident_bonds(NodeRef::Junction(j))
                .into_iter()
                .filter(|&b| active[b])
                .collect()
        })
        .collect();
    let mut element_bond = vec![None; g.elements.len()];
    for (b, &(x, y)) in ends.iter().enumerate() {
        for n in [x, y] {
            if let NodeRef::Element(e) = n {
                element_bond[e] = Some(b);
            }
        }
    }

    let mut a = Assigner {
        g,
        active: active.clone(),
        junction_on,
        assigned: vec![None; g.bonds.len()],
        ends,
        junction_bonds,
        queue: VecDeque::new(),
    };

    let active_bond = |e: usize| element_bond[e].filter(|&b| active[b]);

    // sources
    for (i, el) in g.elements.iter().enumerate() {
        let Some(b) = active_bond(i) else { continue };
        if !el.kind.is_source() {
            continue;
        }
        let node = NodeRef::Element(i);
        let here = a.node_end(b, node);
        let end = if el.kind == ElementKind::Se {
            here
        } else {
            here.opposite()
        };
        a.set(b, end, node)?;
        a.propagate()?;
    }

    // storages, integral causality
    for (i, el) in g.elements.iter().enumerate() {
        let Some(b) = active_bond(i) else { continue };
        if !el.kind.is_storage() {
            continue;
        }
        let node = NodeRef::Element(i);
        let here = a.node_end(b, node);
        let end = if el.kind == ElementKind::C {
            here
        } else {
            here.opposite()
        };
        if a.assigned[b].is_some_and(|e| e != end) {
            return Err(CausalityError::DerivativeCausality { node: el.name.clone() });
        }
        a.set(b, end, node)?;
        a.propagate()?;
    }

    // resistors left free receive effort
    for (i, el) in g.elements.iter().enumerate() {
        let Some(b) = active_bond(i) else { continue };
        if el.kind != ElementKind::R || a.assigned[b].is_some() {
            continue;
        }
        let node = NodeRef::Element(i);
        let end = a.node_end(b, node).opposite();
        a.set(b, end, node)?;
        a.propagate()?;
    }

    // junction-junction bonds still free
    for b in 0..g.bonds.len() {
        if a.active[b] && a.assigned[b].is_none() {
            a.set(b, BondEnd::From, a.ends[b].0)?;
            a.propagate()?;
        }
    }

    // every active junction must now satisfy its constraint
    for j in 0..g.junctions.len() {
        a.queue.push_back(j);
    }
    a.propagate()?;

    let elements = g
        .elements
        .iter()
        .enumerate()
        .map(|(i, el)| match active_bond(i) {
            None => ElementClass::Inactive,
            Some(_) if el.kind.is_storage() => ElementClass::IntegralStorage,
            Some(_) if el.kind.is_source() => ElementClass::Source,
            Some(_) => ElementClass::Resistive,
        })
        .collect();

    Ok(CausalAssignment {
        mode: mode.clone(),
        bonds: a.assigned,
        elements,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeOutcome {
    pub mode: Mode,
    pub result: Result<(), CausalityError>,
    /// Active bonds carry the same causality as in the all-on mode.
    pub matches_nominal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeCausalityReport {
    /// One entry per mode, ordered by mode index.
    pub outcomes: Vec<ModeOutcome>,
    /// Every mode succeeds with all active storages integral.
    pub mode_invariant_integral: bool,
    /// Every mode also agrees with the all-on assignment on its active bonds,
    /// which is what a single compiled diagram relies on.
    pub orientation_invariant: bool,
}

impl ModeCausalityReport {
    pub fn failures(&self) -> impl Iterator<Item = &ModeOutcome> {
        self.outcomes.iter().filter(|o| o.result.is_err())
    }
}

impl fmt::Display for ModeCausalityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.outcomes.first().map_or(0, |o| o.mode.len()).max(4);
        writeln!(f, "{:<width$}  {:<20}  node", "mode", "status")?;
        for o in &self.outcomes {
            let (status, node) = match &o.result {
                Ok(()) if o.matches_nominal => ("ok", ""),
                Ok(()) => ("ok (reoriented)", ""),
                Err(CausalityError::CausalConflict { node }) => ("causal-conflict", node.as_str()),
                Err(CausalityError::DerivativeCausality { node }) => ("derivative-causality", node.as_str()),
                Err(_) => ("error", ""),
            };
            writeln!(f, "{:<width$}  {:<20}  {}", o.mode.to_string(), status, node)?;
        }
        write!(
            f,
            "{} modes; mode-invariant integral causality: {}",
            self.outcomes.len(),
            if self.mode_invariant_integral && self.orientation_invariant {
                "yes"
            } else {
                "no"
            }
        )
    }
}

/// Runs [`assign_causality`] over all 2ⁿ modes.
pub fn check_all_modes(g: &BondGraph, mode_cap: u64) -> Result<ModeCausalityReport, CausalityError> {
    let n = g.switched_junctions().len();
    let count = Mode::count(n)
        .filter(|&c| c <= mode_cap)
        .ok_or(CausalityError::TooManyModes {
            switched: n,
            cap: mode_cap,
        })?;
    let nominal = assign_causality(g, &Mode::all_on(n)).ok();
    let outcomes: Vec<ModeOutcome> = (0..count)
        .map(|index| {
            let mode = Mode::from_index(index, n);
            let result = assign_causality(g, &mode);
            let matches_nominal = match (&result, &nominal) {
                (Ok(a), Some(nom)) => a.bonds.iter().zip(&nom.bonds).all(|(x, y)| x.is_none() || x == y),
                _ => false,
            };
            ModeOutcome {
                mode,
                result: result.map(|_| ()),
                matches_nominal,
            }
        })
        .collect();
    let mode_invariant_integral = outcomes.iter().all(|o| o.result.is_ok());
    let orientation_invariant = outcomes.iter().all(|o| o.matches_nominal);
    Ok(ModeCausalityReport {
        outcomes,
        mode_invariant_integral,
        orientation_invariant,
    })
}
