//! Structural validation of a [`BondGraph`].

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::dsl::is_valid_name;
use crate::expr::{GuardExpr, VarRef};
use crate::model::{BondGraph, ElementKind, JunctionKind, NodeRef, Parameter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    DuplicateName,
    /// Probe label used twice.
    DuplicateProbeLabel,
    /// Name that is not an identifier or is a reserved word.
    InvalidName,
    UnresolvedReference,
    /// Bond with both ends on the same node.
    SelfLoopBond,
    /// Bond joining two elements directly.
    ElementToElementBond,
    /// Element with no bond.
    DetachedElement,
    /// Element with more than one bond.
    MultiplyAttachedElement,
    NonPositiveParameter,
    /// Parameter form not allowed for the element kind.
    InvalidParameter,
    /// Effort of a 1-junction or flow of a 0-junction.
    InvalidVariable,
    /// Expression holding a non-finite literal.
    NonFiniteConstant,
    MissingControlSpec,
    UnexpectedControlSpec,
    /// Empty, non-finite or non-increasing breakpoints.
    InvalidSignal,
    CyclicDecision,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One invariant violation. `item` names the declaration that holds the
/// violation; `name` is the offending name inside it (equal to `item` when the
/// declaration itself is at fault).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub item: String,
    pub name: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} in `{}`: {}", self.kind, self.item, self.message)
    }
}

struct Collector<'g> {
    g: &'g BondGraph,
    out: Vec<Diagnostic>,
}

impl Collector<'_> {
    fn push(&mut self, kind: DiagnosticKind, item: &str, name: &str, message: String) {
        self.out.push(Diagnostic {
            kind,
            item: item.to_string(),
            name: name.to_string(),
            message,
        });
    }

    fn check_var(&mut self, item: &str, v: &VarRef) {
        let g = self.g;
        let name = v.name();
        match v {
            VarRef::Signal(_) => {
                if g.signal(name).is_none() {
                    self.push(
                        DiagnosticKind::UnresolvedReference,
                        item,
                        name,
                        format!("unknown signal `{name}`"),
                    );
                }
            }
            VarRef::Effort(_) | VarRef::Flow(_) => {
                let wrong_junction = match v {
                    VarRef::Effort(_) => JunctionKind::One,
                    _ => JunctionKind::Zero,
                };
                if g.element(name).is_some() || g.bond(name).is_some() {
                    return;
                }
                match g.junction(name) {
                    Some(j) if g.junctions[j].kind == wrong_junction => self.push(
                        DiagnosticKind::InvalidVariable,
                        item,
                        name,
                        format!(
                            "`{v}` is undefined: {}-junction `{name}` has no common {}",
                            wrong_junction.symbol(),
                            if wrong_junction == JunctionKind::One {
                                "effort"
                            } else {
                                "flow"
                            }
                        ),
                    ),
                    Some(_) => {}
                    None => self.push(
                        DiagnosticKind::UnresolvedReference,
                        item,
                        name,
                        format!("`{v}` names no element, junction or bond"),
                    ),
                }
            }
        }
    }

    fn check_guard(&mut self, item: &str, guard: &GuardExpr) {
        if !guard.all_finite() {
            self.push(
                DiagnosticKind::NonFiniteConstant,
                item,
                item,
                format!("guard in `{item}` holds a non-finite number"),
            );
        }
        for v in guard.references() {
            self.check_var(item, &v);
        }
        for d in guard.decisions() {
            if self.g.decision(&d).is_none() {
                self.push(
                    DiagnosticKind::UnresolvedReference,
                    item,
                    &d,
                    format!("unknown decision function `{d}`"),
                );
            }
        }
    }
}

/// Checks every structural invariant; an empty result means the graph is
/// valid. Pure and idempotent.
pub fn validate_graph(g: &BondGraph) -> Vec<Diagnostic> {
    let mut c = Collector { g, out: Vec::new() };

    if !is_valid_name(&g.name) {
        c.push(
            DiagnosticKind::InvalidName,
            &g.name,
            &g.name,
            format!("model name `{}` is not a valid identifier", g.name),
        );
    }

    // single namespace for declarations
    let mut seen = HashSet::new();
    let names = g
        .elements
        .iter()
        .map(|e| e.name.as_str())
        .chain(g.junctions.iter().map(|j| j.name.as_str()))
        .chain(g.bonds.iter().map(|b| b.name.as_str()))
        .chain(g.signals.iter().map(|s| s.name.as_str()))
        .chain(g.decisions.iter().map(|d| d.name.as_str()));
    for name in names {
        if !is_valid_name(name) {
            c.push(
                DiagnosticKind::InvalidName,
                name,
                name,
                format!("`{name}` is not a valid identifier"),
            );
        }
        if !seen.insert(name) {
            c.push(
                DiagnosticKind::DuplicateName,
                name,
                name,
                format!("`{name}` is declared more than once"),
            );
        }
    }
    let mut labels = HashSet::new();
    for p in &g.probes {
        if !is_valid_name(&p.label) && p.label != p.var.to_string() {
            c.push(
                DiagnosticKind::InvalidName,
                &p.label,
                &p.label,
                format!("probe label `{}` is not a valid identifier", p.label),
            );
        }
        if !labels.insert(p.label.as_str()) {
            c.push(
                DiagnosticKind::DuplicateProbeLabel,
                &p.label,
                &p.label,
                format!("probe label `{}` is used more than once", p.label),
            );
        }
    }

    let mut attachments: HashMap<usize, usize> = HashMap::new();
    for b in &g.bonds {
        let ends = [g.node(&b.from), g.node(&b.to)];
        for (end, node) in [&b.from, &b.to].into_iter().zip(ends) {
            if node.is_none() {
                c.push(
                    DiagnosticKind::UnresolvedReference,
                    &b.name,
                    end,
                    format!("bond `{}` refers to unknown node `{end}`", b.name),
                );
            }
        }
        if b.from == b.to {
            c.push(
                DiagnosticKind::SelfLoopBond,
                &b.name,
                &b.name,
                format!("bond `{}` connects `{}` to itself", b.name, b.from),
            );
            continue;
        }
        if let [Some(NodeRef::Element(_)), Some(NodeRef::Element(_))] = ends {
            c.push(
                DiagnosticKind::ElementToElementBond,
                &b.name,
                &b.name,
                format!("bond `{}` joins two elements; route it through a junction", b.name),
            );
        }
        for node in ends.into_iter().flatten() {
            if let NodeRef::Element(e) = node {
                *attachments.entry(e).or_default() += 1;
            }
        }
    }

    for (i, e) in g.elements.iter().enumerate() {
        match attachments.get(&i).copied().unwrap_or(0) {
            0 => c.push(
                DiagnosticKind::DetachedElement,
                &e.name,
                &e.name,
                format!("element `{}` has no bond", e.name),
            ),
            1 => {}
            n => c.push(
                DiagnosticKind::MultiplyAttachedElement,
                &e.name,
                &e.name,
                format!("element `{}` has {n} bonds; exactly one is required", e.name),
            ),
        }

        match (&e.kind, &e.parameter) {
            (ElementKind::C | ElementKind::R | ElementKind::I, Parameter::Constant(v)) => {
                if !(v.is_finite() && *v > 0.0) {
                    c.push(
                        DiagnosticKind::NonPositiveParameter,
                        &e.name,
                        &e.name,
                        format!("{} parameter of `{}` must be positive, got {v}", e.kind, e.name),
                    );
                }
            }
            (ElementKind::C | ElementKind::R | ElementKind::I, _) => c.push(
                DiagnosticKind::InvalidParameter,
                &e.name,
                &e.name,
                format!("{} element `{}` needs a constant parameter", e.kind, e.name),
            ),
            (ElementKind::Sf | ElementKind::Se, Parameter::Modulation(_)) => c.push(
                DiagnosticKind::InvalidParameter,
                &e.name,
                &e.name,
                format!(
                    "{} element `{}` takes a number or a signal; use MSf for modulation",
                    e.kind, e.name
                ),
            ),
            (_, Parameter::Constant(v)) if !v.is_finite() => c.push(
                DiagnosticKind::NonFiniteConstant,
                &e.name,
                &e.name,
                format!("parameter of `{}` is not finite", e.name),
            ),
            (_, Parameter::Modulation(m)) if !m.all_finite() => c.push(
                DiagnosticKind::NonFiniteConstant,
                &e.name,
                &e.name,
                format!("modulation of `{}` holds a non-finite number", e.name),
            ),
            _ => {}
        }
        for v in e.parameter.references() {
            c.check_var(&e.name, &v);
        }
    }

    for j in &g.junctions {
        match (j.switched, &j.cspec) {
            (true, None) => c.push(
                DiagnosticKind::MissingControlSpec,
                &j.name,
                &j.name,
                format!("switched junction `{}` has no control specification", j.name),
            ),
            (false, Some(_)) => c.push(
                DiagnosticKind::UnexpectedControlSpec,
                &j.name,
                &j.name,
                format!("junction `{}` is not switched but has a control specification", j.name),
            ),
            _ => {}
        }
        if let Some(cs) = &j.cspec {
            c.check_guard(&j.name, &cs.on_guard);
            c.check_guard(&j.name, &cs.off_guard);
        }
    }

    for s in &g.signals {
        let bad = s.breakpoints.is_empty()
            || s.breakpoints.iter().any(|(t, v)| !t.is_finite() || !v.is_finite())
            || s.breakpoints.windows(2).any(|w| w[1].0 <= w[0].0);
        if bad {
            c.push(
                DiagnosticKind::InvalidSignal,
                &s.name,
                &s.name,
                format!(
                    "signal `{}` needs finite breakpoints strictly increasing in time",
                    s.name
                ),
            );
        }
    }

    for d in &g.decisions {
        c.check_guard(&d.name, &d.guard);
    }
    for d in decision_cycles(g) {
        c.push(
            DiagnosticKind::CyclicDecision,
            &d,
            &d,
            format!("decision `{d}` depends on itself"),
        );
    }

    for p in &g.probes {
        c.check_var(&p.label, &p.var);
    }

    c.out
}

/// Decisions that lie on a reference cycle, in declaration order.
fn decision_cycles(g: &BondGraph) -> Vec<String> {
    let index: HashMap<&str, usize> = g
        .decisions
        .iter()
        .enumerate()
        .map(|(i, d)| (d.name.as_str(), i))
        .collect();
    let edges: Vec<Vec<usize>> = g
        .decisions
        .iter()
        .map(|d| {
            d.guard
                .decisions()
                .iter()
                .filter_map(|n| index.get(n.as_str()).copied())
                .collect()
        })
        .collect();
    (0..edges.len())
        .filter(|&start| {
            // is `start` reachable from itself?
            let mut stack = edges[start].clone();
            let mut visited = vec![false; edges.len()];
            while let Some(n) = stack.pop() {
                if n == start {
                    return true;
                }
                if !std::mem::replace(&mut visited[n], true) {
                    stack.extend(&edges[n]);
                }
            }
            false
        })
        .map(|i| g.decisions[i].name.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{CmpOp, NumExpr};
    use crate::model::*;

    fn one_tank() -> BondGraph {
        let mut g = BondGraph::new("tank");
        g.elements = vec![
            Element {
                name: "Sf1".into(),
                kind: ElementKind::Sf,
                parameter: Parameter::Constant(1.0),
            },
            Element {
                name: "C1".into(),
                kind: ElementKind::C,
                parameter: Parameter::Constant(1.0),
            },
            Element {
                name: "R1".into(),
                kind: ElementKind::R,
                parameter: Parameter::Constant(1.0),
            },
        ];
        g.junctions = vec![Junction::plain("j", JunctionKind::Zero)];
        g.bonds = vec![
            Bond {
                name: "b1".into(),
                from: "Sf1".into(),
                to: "j".into(),
            },
            Bond {
                name: "b2".into(),
                from: "j".into(),
                to: "C1".into(),
            },
            Bond {
                name: "b3".into(),
                from: "j".into(),
                to: "R1".into(),
            },
        ];
        g
    }

    fn kinds(g: &BondGraph) -> Vec<DiagnosticKind> {
        validate_graph(g).into_iter().map(|d| d.kind).collect()
    }

    #[test]
    fn minimal_tank_is_clean() {
        assert!(validate_graph(&one_tank()).is_empty());
    }

    #[test]
    fn dangling_bond() {
        let mut g = one_tank();
        g.bonds[0].to = "nowhere".into();
        let d = validate_graph(&g);
        assert!(d
            .iter()
            .any(|d| d.kind == DiagnosticKind::UnresolvedReference && d.item == "b1" && d.name == "nowhere"));
    }

    #[test]
    fn switched_junction_without_cspec() {
        let mut g = one_tank();
        g.junctions[0].switched = true;
        assert_eq!(kinds(&g), vec![DiagnosticKind::MissingControlSpec]);
    }

    #[test]
    fn unexpected_cspec_on_plain_junction() {
        let mut g = one_tank();
        g.junctions[0].cspec = Some(ControlSpec {
            on_guard: GuardExpr::Const(true),
            off_guard: GuardExpr::Const(false),
            initial_state: SwitchState::On,
        });
        assert_eq!(kinds(&g), vec![DiagnosticKind::UnexpectedControlSpec]);
    }

    #[test]
    fn element_attachment_rules() {
        let mut g = one_tank();
        g.bonds.pop();
        assert_eq!(kinds(&g), vec![DiagnosticKind::DetachedElement]);

        let mut g = one_tank();
        g.bonds.push(Bond {
            name: "b4".into(),
            from: "j".into(),
            to: "R1".into(),
        });
        assert_eq!(kinds(&g), vec![DiagnosticKind::MultiplyAttachedElement]);

        let mut g = one_tank();
        g.bonds[2] = Bond {
            name: "b3".into(),
            from: "C1".into(),
            to: "R1".into(),
        };
        assert!(kinds(&g).contains(&DiagnosticKind::ElementToElementBond));
    }

    #[test]
    fn parameters_must_be_positive() {
        let mut g = one_tank();
        g.elements[1].parameter = Parameter::Constant(0.0);
        g.elements[2].parameter = Parameter::Constant(-2.0);
        assert_eq!(
            kinds(&g),
            vec![
                DiagnosticKind::NonPositiveParameter,
                DiagnosticKind::NonPositiveParameter
            ]
        );
    }

    #[test]
    fn effort_of_one_junction_is_invalid() {
        let mut g = one_tank();
        g.junctions[0].kind = JunctionKind::One;
        g.probes.push(Probe {
            label: "p".into(),
            var: VarRef::Effort("j".into()),
        });
        assert_eq!(kinds(&g), vec![DiagnosticKind::InvalidVariable]);
    }

    #[test]
    fn duplicate_names_and_bad_signals() {
        let mut g = one_tank();
        g.signals.push(SignalDef {
            name: "R1".into(),
            breakpoints: vec![(1.0, 0.0), (1.0, 1.0)],
        });
        assert_eq!(
            kinds(&g),
            vec![DiagnosticKind::DuplicateName, DiagnosticKind::InvalidSignal]
        );
    }

    #[test]
    fn decision_cycles_and_unknown_refs() {
        let mut g = one_tank();
        g.decisions.push(DecisionDef {
            name: "A".into(),
            guard: GuardExpr::Decision("B".into()),
        });
        g.decisions.push(DecisionDef {
            name: "B".into(),
            guard: GuardExpr::Decision("A".into()).or(GuardExpr::cmp(
                NumExpr::effort("C7"),
                CmpOp::Gt,
                NumExpr::Const(0.0),
            )),
        });
        let d = validate_graph(&g);
        assert_eq!(
            d.iter().map(|d| d.kind).collect::<Vec<_>>(),
            vec![
                DiagnosticKind::UnresolvedReference,
                DiagnosticKind::CyclicDecision,
                DiagnosticKind::CyclicDecision
            ]
        );
        assert_eq!(d[0].name, "C7");
    }

    #[test]
    fn names_must_be_identifiers() {
        let mut g = one_tank();
        g.junctions[0].name = "bond".into();
        for b in &mut g.bonds {
            b.to = b.to.replace('j', "bond");
            b.from = b.from.replace('j', "bond");
        }
        g.elements[0].name = "1x".into();
        g.bonds[0].from = "1x".into();
        assert_eq!(
            kinds(&g),
            vec![DiagnosticKind::InvalidName, DiagnosticKind::InvalidName]
        );
    }

    #[test]
    fn validation_is_idempotent() {
        let mut g = one_tank();
        g.bonds[1].to = "zz".into();
        let before = g.clone();
        assert_eq!(validate_graph(&g), validate_graph(&g));
        assert_eq!(g, before);
    }
}
