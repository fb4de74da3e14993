use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use super::{Block, BlockDiagram, BlockKind, CompileError};
use crate::causality::{assign_causality, check_all_modes, BondEnd, CausalAssignment};
use crate::expr::{ArithOp, NumExpr, VarRef};
use crate::model::{BondGraph, ElementKind, JunctionKind, Mode, NodeRef, Parameter};
use crate::validate::validate_graph;

pub const DEFAULT_MODE_CAP: u64 = 1 << 16;

/// Value reference before aliases are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Src {
    Block(usize),
    /// Effort of a bond as seen by consumers, i.e. switched.
    Effort(usize),
    Flow(usize),
    /// Value as produced by the bond's causal end, before switching.
    RawEffort(usize),
    RawFlow(usize),
    /// Variable of a junction with no bonds.
    Zero,
}

struct Proto {
    name: String,
    kind: BlockKind,
    inputs: Vec<Src>,
}

struct Builder<'g> {
    g: &'g BondGraph,
    ca: &'g CausalAssignment,
    ends: Vec<(NodeRef, NodeRef)>,
    blocks: Vec<Proto>,
    effort_def: Vec<Src>,
    flow_def: Vec<Src>,
    integrators: HashMap<usize, usize>,
    signals: HashMap<String, usize>,
    clock: Option<usize>,
    resolved: HashMap<Src, usize>,
    switches: HashMap<(usize, usize), usize>,
}

pub fn compile(g: &BondGraph) -> Result<BlockDiagram, CompileError> {
    compile_with_cap(g, DEFAULT_MODE_CAP)
}

/// Compiles after checking causality in at most `mode_cap` modes.
pub fn compile_with_cap(g: &BondGraph, mode_cap: u64) -> Result<BlockDiagram, CompileError> {
    let diagnostics = validate_graph(g);
    if !diagnostics.is_empty() {
        return Err(CompileError::Invalid(diagnostics));
    }
    let report = check_all_modes(g, mode_cap)?;
    if let Some(bad) = report.outcomes.iter().find(|o| o.result.is_err()) {
        return Err(bad.result.clone().unwrap_err().into());
    }
    if let Some(bad) = report.outcomes.iter().find(|o| !o.matches_nominal) {
        return Err(CompileError::ModeDependentCausality {
            mode: bad.mode.to_string(),
            node: None,
        });
    }
    let ca = assign_causality(g, &Mode::all_on(g.switched_junctions().len()))?;
    let ends = g
        .bonds
        .iter()
        .map(|b| (g.node(&b.from).unwrap(), g.node(&b.to).unwrap()))
        .collect();
    let mut b = Builder {
        g,
        ca: &ca,
        ends,
        blocks: Vec::new(),
        effort_def: Vec::new(),
        flow_def: Vec::new(),
        integrators: HashMap::new(),
        signals: HashMap::new(),
        clock: None,
        resolved: HashMap::new(),
        switches: HashMap::new(),
    };
    b.define()?;
    let (blocks, vars, probes, states, bond_effort, bond_flow) = b.resolve_all()?;
    let schedule = schedule(&blocks)?;
    Ok(BlockDiagram {
        graph: g.clone(),
        causality: ca,
        blocks,
        schedule,
        states,
        bond_effort,
        bond_flow,
        probes,
        vars,
    })
}

type Resolved = (
    Vec<Block>,
    HashMap<String, (Option<usize>, Option<usize>)>,
    Vec<usize>,
    Vec<usize>,
    Vec<usize>,
    Vec<usize>,
);

impl Builder<'_> {
    fn add(&mut self, name: String, kind: BlockKind, inputs: Vec<Src>) -> Src {
        self.blocks.push(Proto { name, kind, inputs });
        Src::Block(self.blocks.len() - 1)
    }

    /// +1 if the bond points into `node`.
    fn inward_sign(&self, bond: usize, node: NodeRef) -> f64 {
        if self.ends[bond].1 == node {
            1.0
        } else {
            -1.0
        }
    }

    fn effort_end(&self, bond: usize) -> NodeRef {
        match self.ca.bonds[bond].expect("all bonds are active with every junction on") {
            BondEnd::From => self.ends[bond].0,
            BondEnd::To => self.ends[bond].1,
        }
    }

    fn flow_end(&self, bond: usize) -> NodeRef {
        let (a, b) = self.ends[bond];
        if self.effort_end(bond) == a {
            b
        } else {
            a
        }
    }

    fn element_bond(&self, e: usize) -> usize {
        self.g.incident_bonds(NodeRef::Element(e))[0]
    }

    fn sum(&mut self, name: String, terms: Vec<(f64, Src)>) -> Src {
        match terms.as_slice() {
            [] => self.add(name, BlockKind::Constant { value: 0.0 }, vec![]),
            [(s, src)] if *s == 1.0 => *src,
            _ => {
                let (signs, inputs) = terms.into_iter().unzip();
                self.add(name, BlockKind::Sum { signs }, inputs)
            }
        }
    }

    fn signal(&mut self, name: &str) -> Src {
        if let Some(&i) = self.signals.get(name) {
            return Src::Block(i);
        }
        let src = self.add(
            format!("signal_{name}"),
            BlockKind::SignalSource { signal: name.into() },
            vec![],
        );
        if let Src::Block(i) = src {
            self.signals.insert(name.into(), i);
        }
        src
    }

    fn clock(&mut self) -> Src {
        if let Some(i) = self.clock {
            return Src::Block(i);
        }
        let src = self.add("time".into(), BlockKind::Clock, vec![]);
        if let Src::Block(i) = src {
            self.clock = Some(i);
        }
        src
    }

    fn parameter(&mut self, e: usize) -> Src {
        let el = &self.g.elements[e];
        match &el.parameter {
            Parameter::Constant(v) => self.add(format!("{}.value", el.name), BlockKind::Constant { value: *v }, vec![]),
            Parameter::Signal(s) => self.signal(s),
            Parameter::Modulation(m) => {
                let mut counter = 0;
                self.expr(m, &el.name, &mut counter)
            }
        }
    }

    fn expr(&mut self, m: &NumExpr, owner: &str, counter: &mut usize) -> Src {
        match m {
            NumExpr::Const(v) => {
                *counter += 1;
                self.add(format!("{owner}.m{counter}"), BlockKind::Constant { value: *v }, vec![])
            }
            NumExpr::Time => self.clock(),
            NumExpr::Var(v) => self.var(v),
            NumExpr::Binary { op, lhs, rhs } => {
                let name_of = |c: &mut usize| {
                    *c += 1;
                    format!("{owner}.m{c}")
                };
                match (op, lhs.as_ref(), rhs.as_ref()) {
                    (ArithOp::Mul, NumExpr::Const(k), x) | (ArithOp::Mul, x, NumExpr::Const(k)) => {
                        let x = self.expr(x, owner, counter);
                        let name = name_of(counter);
                        self.add(name, BlockKind::Gain { k: *k }, vec![x])
                    }
                    (ArithOp::Add | ArithOp::Sub, l, r) => {
                        let l = self.expr(l, owner, counter);
                        let r = self.expr(r, owner, counter);
                        let sign = if *op == ArithOp::Add { 1.0 } else { -1.0 };
                        let name = name_of(counter);
                        self.add(name, BlockKind::Sum { signs: vec![1.0, sign] }, vec![l, r])
                    }
                    (op, l, r) => {
                        let l = self.expr(l, owner, counter);
                        let r = self.expr(r, owner, counter);
                        let name = name_of(counter);
                        self.add(name, BlockKind::Arith { op: *op }, vec![l, r])
                    }
                }
            }
        }
    }

    fn var(&mut self, v: &VarRef) -> Src {
        match v {
            VarRef::Signal(s) => self.signal(s),
            VarRef::Effort(n) => self.effort_var(n).unwrap_or(Src::Zero),
            VarRef::Flow(n) => self.flow_var(n).unwrap_or(Src::Zero),
        }
    }

    fn effort_var(&self, name: &str) -> Option<Src> {
        if let Some(b) = self.g.bond(name) {
            return Some(Src::Effort(b));
        }
        if let Some(e) = self.g.element(name) {
            let b = self.element_bond(e);
            return Some(if self.g.elements[e].kind == ElementKind::C {
                Src::RawEffort(b)
            } else {
                Src::Effort(b)
            });
        }
        let j = self.g.junction(name)?;
        if self.g.junctions[j].kind != JunctionKind::Zero {
            return None;
        }
        Some(match self.ca.determining_bonds(self.g, j).first() {
            Some(&b) => Src::Effort(b),
            None => Src::Zero,
        })
    }

    fn flow_var(&self, name: &str) -> Option<Src> {
        if let Some(b) = self.g.bond(name) {
            return Some(Src::Flow(b));
        }
        if let Some(e) = self.g.element(name) {
            let b = self.element_bond(e);
            return Some(if self.g.elements[e].kind == ElementKind::I {
                Src::RawFlow(b)
            } else {
                Src::Flow(b)
            });
        }
        let j = self.g.junction(name)?;
        if self.g.junctions[j].kind != JunctionKind::One {
            return None;
        }
        Some(match self.ca.determining_bonds(self.g, j).first() {
            Some(&b) => Src::Flow(b),
            None => Src::Zero,
        })
    }

    fn define(&mut self) -> Result<(), CompileError> {
        let g = self.g;
        for e in g.storages() {
            let el = &g.elements[e];
            let b = self.element_bond(e);
            let s = self.inward_sign(b, NodeRef::Element(e));
            let Parameter::Constant(value) = el.parameter else {
                unreachable!("validated storage parameter")
            };
            let input = if el.kind == ElementKind::C {
                Src::Flow(b)
            } else {
                Src::Effort(b)
            };
            let src = self.add(
                el.name.clone(),
                BlockKind::Integrator {
                    element: el.name.clone(),
                    gain: s / value,
                },
                vec![input],
            );
            if let Src::Block(i) = src {
                self.integrators.insert(e, i);
            }
        }

        for b in 0..g.bonds.len() {
            let bond = &g.bonds[b].name;
            let effort = match self.effort_end(b) {
                NodeRef::Element(e) => {
                    let el = &g.elements[e];
                    match el.kind {
                        ElementKind::C => Src::Block(self.integrators[&e]),
                        ElementKind::Se => self.parameter(e),
                        ElementKind::R => {
                            let s = self.inward_sign(b, NodeRef::Element(e));
                            let Parameter::Constant(r) = el.parameter else {
                                unreachable!("validated resistance")
                            };
                            self.add(format!("e_{bond}"), BlockKind::Gain { k: s * r }, vec![Src::Flow(b)])
                        }
                        _ => unreachable!("{} cannot impose effort", el.kind),
                    }
                }
                NodeRef::Junction(j) => {
                    let node = NodeRef::Junction(j);
                    match g.junctions[j].kind {
                        JunctionKind::Zero => Src::Effort(self.ca.determining_bonds(g, j)[0]),
                        JunctionKind::One => {
                            let sb = self.inward_sign(b, node);
                            let terms = g
                                .incident_bonds(node)
                                .into_iter()
                                .filter(|&x| x != b)
                                .map(|x| (-sb * self.inward_sign(x, node), Src::Effort(x)))
                                .collect();
                            self.sum(format!("e_{bond}"), terms)
                        }
                    }
                }
            };
            self.effort_def.push(effort);

            let flow = match self.flow_end(b) {
                NodeRef::Element(e) => {
                    let el = &g.elements[e];
                    let s = self.inward_sign(b, NodeRef::Element(e));
                    match el.kind {
                        ElementKind::Sf | ElementKind::MSf | ElementKind::I => {
                            let value = if el.kind == ElementKind::I {
                                Src::Block(self.integrators[&e])
                            } else {
                                self.parameter(e)
                            };
                            // sources push flow out of themselves; I state is inward flow
                            let out = if el.kind == ElementKind::I { s } else { -s };
                            if out == 1.0 {
                                value
                            } else {
                                self.add(format!("f_{bond}"), BlockKind::Gain { k: -1.0 }, vec![value])
                            }
                        }
                        ElementKind::R => {
                            let Parameter::Constant(r) = el.parameter else {
                                unreachable!("validated resistance")
                            };
                            self.add(format!("f_{bond}"), BlockKind::Gain { k: s / r }, vec![Src::Effort(b)])
                        }
                        _ => unreachable!("{} cannot impose flow", el.kind),
                    }
                }
                NodeRef::Junction(j) => {
                    let node = NodeRef::Junction(j);
                    match g.junctions[j].kind {
                        JunctionKind::One => Src::Flow(self.ca.determining_bonds(g, j)[0]),
                        JunctionKind::Zero => {
                            let sb = self.inward_sign(b, node);
                            let terms = g
                                .incident_bonds(node)
                                .into_iter()
                                .filter(|&x| x != b)
                                .map(|x| (-sb * self.inward_sign(x, node), Src::Flow(x)))
                                .collect();
                            self.sum(format!("f_{bond}"), terms)
                        }
                    }
                }
            };
            self.flow_def.push(flow);
        }

        for p in &g.probes {
            let src = self.var(&p.var);
            self.add(
                format!("probe_{}", p.label),
                BlockKind::Probe { label: p.label.clone() },
                vec![src],
            );
        }
        Ok(())
    }

    fn alias_name(&self, src: Src) -> String {
        match src {
            Src::Effort(b) | Src::RawEffort(b) => format!("e_{}", self.g.bonds[b].name),
            Src::Flow(b) | Src::RawFlow(b) => format!("f_{}", self.g.bonds[b].name),
            Src::Block(i) => self.blocks[i].name.clone(),
            Src::Zero => "zero".into(),
        }
    }

    fn resolve(&mut self, src: Src, visiting: &mut Vec<Src>) -> Result<usize, CompileError> {
        if let Src::Block(i) = src {
            return Ok(i);
        }
        if let Some(&i) = self.resolved.get(&src) {
            return Ok(i);
        }
        if let Some(pos) = visiting.iter().position(|&s| s == src) {
            let mut blocks: Vec<String> = visiting[pos..].iter().map(|&s| self.alias_name(s)).collect();
            blocks.dedup();
            return Err(CompileError::AlgebraicLoop { blocks });
        }
        visiting.push(src);
        let out = match src {
            Src::RawEffort(b) => self.resolve(self.effort_def[b], visiting)?,
            Src::RawFlow(b) => self.resolve(self.flow_def[b], visiting)?,
            Src::Effort(b) | Src::Flow(b) => {
                let raw = if matches!(src, Src::Effort(_)) {
                    Src::RawEffort(b)
                } else {
                    Src::RawFlow(b)
                };
                let mut i = self.resolve(raw, visiting)?;
                let (x, y) = self.ends[b];
                for n in [x, y] {
                    if let NodeRef::Junction(j) = n {
                        if let Some(slot) = self.g.switch_slot(j) {
                            i = self.switch(i, j, slot);
                        }
                    }
                }
                i
            }
            Src::Zero => {
                let Src::Block(i) = self.add("zero".into(), BlockKind::Constant { value: 0.0 }, vec![]) else {
                    unreachable!()
                };
                i
            }
            Src::Block(_) => unreachable!(),
        };
        visiting.pop();
        self.resolved.insert(src, out);
        Ok(out)
    }

    fn switch(&mut self, input: usize, junction: usize, slot: usize) -> usize {
        if matches!(self.blocks[input].kind, BlockKind::Switch { slot: s, .. } if s == slot) {
            return input;
        }
        if let Some(&i) = self.switches.get(&(input, slot)) {
            return i;
        }
        let jname = self.g.junctions[junction].name.clone();
        let name = format!("{}@{}", self.blocks[input].name, jname);
        let Src::Block(i) = self.add(
            name,
            BlockKind::Switch { junction: jname, slot },
            vec![Src::Block(input)],
        ) else {
            unreachable!()
        };
        self.switches.insert((input, slot), i);
        i
    }

    fn resolve_all(mut self) -> Result<Resolved, CompileError> {
        let mut inputs = Vec::new();
        let mut i = 0;
        while i < self.blocks.len() {
            let srcs = self.blocks[i].inputs.clone();
            let mut resolved = Vec::with_capacity(srcs.len());
            for s in srcs {
                resolved.push(self.resolve(s, &mut Vec::new())?);
            }
            inputs.push(resolved);
            i += 1;
        }
        let g = self.g;
        let mut bond_effort = Vec::new();
        let mut bond_flow = Vec::new();
        for b in 0..g.bonds.len() {
            bond_effort.push(self.resolve(Src::Effort(b), &mut Vec::new())?);
            bond_flow.push(self.resolve(Src::Flow(b), &mut Vec::new())?);
        }
        let mut vars = HashMap::new();
        let names = g
            .elements
            .iter()
            .map(|e| &e.name)
            .chain(g.junctions.iter().map(|j| &j.name))
            .chain(g.bonds.iter().map(|b| &b.name));
        for name in names {
            let e = match self.effort_var(name) {
                Some(s) => Some(self.resolve(s, &mut Vec::new())?),
                None => None,
            };
            let f = match self.flow_var(name) {
                Some(s) => Some(self.resolve(s, &mut Vec::new())?),
                None => None,
            };
            vars.insert(name.clone(), (e, f));
        }
        // resolving may have added switches after the loop above
        for p in &self.blocks[inputs.len()..] {
            let resolved = p
                .inputs
                .iter()
                .map(|s| match s {
                    Src::Block(x) => *x,
                    _ => unreachable!("late blocks take resolved inputs"),
                })
                .collect();
            inputs.push(resolved);
        }
        let blocks: Vec<Block> = self
            .blocks
            .into_iter()
            .zip(inputs)
            .map(|(p, inputs)| Block {
                name: p.name,
                kind: p.kind,
                inputs,
            })
            .collect();
        let mut states: Vec<(usize, usize)> = self.integrators.iter().map(|(&e, &i)| (e, i)).collect();
        states.sort();
        let states = states.into_iter().map(|(_, i)| i).collect();
        let probes = blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| matches!(b.kind, BlockKind::Probe { .. }))
            .map(|(i, _)| i)
            .collect();
        Ok((blocks, vars, probes, states, bond_effort, bond_flow))
    }
}

/// Topological order of the non-integrator blocks, lowest index first among
/// ready blocks. Integrator outputs are known from the state.
fn schedule(blocks: &[Block]) -> Result<Vec<usize>, CompileError> {
    let is_root = |i: usize| matches!(blocks[i].kind, BlockKind::Integrator { .. });
    let n = blocks.len();
    let mut pending = vec![0usize; n];
    let mut users = vec![Vec::new(); n];
    for (i, b) in blocks.iter().enumerate() {
        if is_root(i) {
            continue;
        }
        for &x in &b.inputs {
            if !is_root(x) {
                pending[i] += 1;
                users[x].push(i);
            }
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n)
        .filter(|&i| !is_root(i) && pending[i] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::new();
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &u in &users[i] {
            pending[u] -= 1;
            if pending[u] == 0 {
                ready.push(Reverse(u));
            }
        }
    }
    let total = (0..n).filter(|&i| !is_root(i)).count();
    if order.len() == total {
        return Ok(order);
    }
    // walk backwards through unscheduled inputs until a block repeats
    let mut path: Vec<usize> = Vec::new();
    let mut at = (0..n).find(|&i| !is_root(i) && pending[i] > 0).unwrap();
    loop {
        if let Some(pos) = path.iter().position(|&x| x == at) {
            let mut cycle: Vec<String> = path[pos..].iter().map(|&i| blocks[i].name.clone()).collect();
            cycle.reverse();
            return Err(CompileError::AlgebraicLoop { blocks: cycle });
        }
        path.push(at);
        at = *blocks[at]
            .inputs
            .iter()
            .find(|&&x| !is_root(x) && pending[x] > 0)
            .unwrap();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_model;

    fn model(body: &str) -> BondGraph {
        parse_model(&format!("bondgraph m {{\n{body}\n}}\n")).unwrap()
    }

    const ONE_TANK: &str = "
  signal u = piecewise(0.0: 1.0)
  element Sf Sf1 { value = signal(u) }
  element C C1 { value = 1.0 }
  element R R1 { value = 1.0 }
  junction 0 j
  bond b1 from Sf1 to j
  bond b2 from j to C1
  bond b3 from j to R1";

    #[test]
    fn one_tank_block_census() {
        let d = compile(&model(ONE_TANK)).unwrap();
        assert_eq!(d.count("Integrator"), 1);
        assert_eq!(d.count("Gain"), 1);
        assert_eq!(d.count("Sum"), 1);
        assert_eq!(d.count("SignalSource"), 1);
        assert_eq!(d.blocks.len(), 4);
        assert_eq!(d.schedule.len(), 3);
        assert_eq!(d.state_names(), vec!["C1"]);
    }

    #[test]
    fn schedule_respects_dependencies() {
        let d = compile(&model(ONE_TANK)).unwrap();
        let pos = |i: usize| d.schedule.iter().position(|&x| x == i);
        for w in d.wires() {
            if let (Some(a), Some(b)) = (pos(w.from), pos(w.to)) {
                assert!(a < b, "{} before {}", d.blocks[w.from].name, d.blocks[w.to].name);
            }
        }
    }

    #[test]
    fn self_dependent_modulation_is_a_loop() {
        let g = model(
            "
  element MSf M { value = (flow(b1) * 2.0) }
  element C C1 { value = 1.0 }
  junction 0 j
  bond b1 from M to j
  bond b2 from j to C1",
        );
        match compile(&g) {
            Err(CompileError::AlgebraicLoop { blocks }) => assert!(!blocks.is_empty()),
            other => panic!("expected loop, got {other:?}"),
        }
        let g = model(
            "
  element MSf M { value = flow(b1) }
  element C C1 { value = 1.0 }
  junction 0 j
  bond b1 from M to j
  bond b2 from j to C1",
        );
        assert!(matches!(compile(&g), Err(CompileError::AlgebraicLoop { .. })));
    }

    #[test]
    fn switched_bonds_pass_through_one_switch() {
        let g = model(&format!(
            "{ONE_TANK}
  junction 1 k switched {{ on_guard = true; off_guard = false; init = off }}
  element R R2 {{ value = 2.0 }}
  bond b4 from j to k
  bond b5 from k to R2"
        ));
        let d = compile(&g).unwrap();
        for b in [3, 4] {
            for i in [d.bond_effort[b], d.bond_flow[b]] {
                assert!(matches!(d.blocks[i].kind, BlockKind::Switch { slot: 0, .. }));
                let inner = d.blocks[i].inputs[0];
                assert!(!matches!(d.blocks[inner].kind, BlockKind::Switch { .. }));
            }
        }
    }

    #[test]
    fn invalid_models_are_rejected() {
        let mut g = model(ONE_TANK);
        g.bonds[0].to = "nowhere".into();
        assert!(matches!(compile(&g), Err(CompileError::Invalid(_))));
    }
}
