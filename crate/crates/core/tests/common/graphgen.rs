//! Random valid bond graphs driven by a stream of random words.

use hbg_core::expr::{ArithOp, CmpOp, GuardExpr, NumExpr, VarRef};
use hbg_core::model::{
    Bond, BondGraph, ControlSpec, DecisionDef, Element, ElementKind, Junction, JunctionKind, Parameter, Probe,
    SignalDef, SwitchState,
};

pub struct Gen<'a> {
    next: &'a mut dyn FnMut() -> u32,
}

impl<'a> Gen<'a> {
    pub fn new(next: &'a mut dyn FnMut() -> u32) -> Self {
        Gen { next }
    }

    fn below(&mut self, n: usize) -> usize {
        ((self.next)() as usize) % n.max(1)
    }

    fn coin(&mut self) -> bool {
        self.below(2) == 0
    }

    fn pick<'s, T>(&mut self, items: &'s [T]) -> &'s T {
        &items[self.below(items.len())]
    }

    fn positive(&mut self) -> f64 {
        let special = [1.0, 0.5, 0.1, 1e-7, 2.5e10, 0.1 + 0.2, 1.0 / 3.0];
        if self.coin() {
            *self.pick(&special)
        } else {
            (1 + self.below(1_000_000)) as f64 / 997.0
        }
    }

    fn real(&mut self) -> f64 {
        let v = self.positive();
        match self.below(4) {
            0 => -v,
            1 => 0.0,
            _ => v,
        }
    }

    fn num(&mut self, g: &BondGraph, depth: usize) -> NumExpr {
        let leaf = depth == 0 || self.below(3) == 0;
        if leaf {
            return match self.below(4) {
                0 => NumExpr::Const(self.real()),
                1 => NumExpr::Time,
                2 if !g.signals.is_empty() => NumExpr::Var(VarRef::Signal(self.pick(&g.signals).name.clone())),
                _ => NumExpr::Var(self.var(g)),
            };
        }
        let op = *self.pick(&[ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div, ArithOp::Rem]);
        NumExpr::binary(op, self.num(g, depth - 1), self.num(g, depth - 1))
    }

    /// Effort or flow of something that has one.
    fn var(&mut self, g: &BondGraph) -> VarRef {
        let choice = self.below(3);
        if choice == 0 && !g.bonds.is_empty() {
            let b = self.pick(&g.bonds).name.clone();
            return if self.coin() {
                VarRef::Effort(b)
            } else {
                VarRef::Flow(b)
            };
        }
        if choice == 1 && !g.elements.is_empty() {
            let e = self.pick(&g.elements).name.clone();
            return if self.coin() {
                VarRef::Effort(e)
            } else {
                VarRef::Flow(e)
            };
        }
        let j = self.pick(&g.junctions);
        match j.kind {
            JunctionKind::Zero => VarRef::Effort(j.name.clone()),
            JunctionKind::One => VarRef::Flow(j.name.clone()),
        }
    }

    fn guard(&mut self, g: &BondGraph, decisions: usize, depth: usize) -> GuardExpr {
        let leaf = depth == 0 || self.below(3) == 0;
        if leaf {
            return match self.below(5) {
                0 => GuardExpr::Const(self.coin()),
                1 if decisions > 0 => GuardExpr::Decision(g.decisions[self.below(decisions)].name.clone()),
                2 if !g.signals.is_empty() => GuardExpr::Signal(self.pick(&g.signals).name.clone()),
                _ => {
                    let op = *self.pick(&[CmpOp::Lt, CmpOp::Le, CmpOp::Ge, CmpOp::Gt, CmpOp::Eq]);
                    GuardExpr::cmp(self.num(g, 1), op, self.num(g, 1))
                }
            };
        }
        match self.below(3) {
            0 => self.guard(g, decisions, depth - 1).not(),
            1 => self
                .guard(g, decisions, depth - 1)
                .and(self.guard(g, decisions, depth - 1)),
            _ => self
                .guard(g, decisions, depth - 1)
                .or(self.guard(g, decisions, depth - 1)),
        }
    }

    pub fn graph(&mut self) -> BondGraph {
        let mut g = BondGraph::new(format!("random_{}", self.below(1000)));

        for i in 0..self.below(3) {
            let mut t = 0.0;
            let mut breakpoints = Vec::new();
            for _ in 0..1 + self.below(4) {
                breakpoints.push((t, self.real()));
                let step = self.positive();
                t = (t + step).max(t * (1.0 + 1e-9) + 1e-9);
            }
            g.signals.push(SignalDef {
                name: format!("s{i}"),
                breakpoints,
            });
        }

        let junctions = 1 + self.below(4);
        for i in 0..junctions {
            let kind = if self.coin() {
                JunctionKind::Zero
            } else {
                JunctionKind::One
            };
            g.junctions.push(Junction::plain(format!("j{i}"), kind));
        }

        let kinds = [
            ElementKind::C,
            ElementKind::R,
            ElementKind::I,
            ElementKind::Sf,
            ElementKind::MSf,
            ElementKind::Se,
        ];
        let elements = self.below(6);
        let mut modulated = Vec::new();
        for i in 0..elements {
            let kind = *self.pick(&kinds);
            let name = format!("e{i}");
            let parameter = if kind.is_passive() {
                Parameter::Constant(self.positive())
            } else if kind == ElementKind::MSf {
                modulated.push(i);
                Parameter::Constant(0.0)
            } else if !g.signals.is_empty() && self.coin() {
                Parameter::Signal(self.pick(&g.signals).name.clone())
            } else {
                Parameter::Constant(self.real())
            };
            g.elements.push(Element { name, kind, parameter });
            let j = format!("j{}", self.below(junctions));
            let (from, to) = if self.coin() {
                (format!("e{i}"), j)
            } else {
                (j, format!("e{i}"))
            };
            g.bonds.push(Bond {
                name: format!("b{}", g.bonds.len()),
                from,
                to,
            });
        }
        if junctions > 1 {
            for _ in 0..self.below(4) {
                let a = self.below(junctions);
                let b = (a + 1 + self.below(junctions - 1)) % junctions;
                g.bonds.push(Bond {
                    name: format!("b{}", g.bonds.len()),
                    from: format!("j{a}"),
                    to: format!("j{b}"),
                });
            }
        }
        for i in modulated {
            g.elements[i].parameter = Parameter::from_expr(self.num(&g, 2));
        }

        for i in 0..self.below(3) {
            let guard = self.guard(&g, i, 2);
            g.decisions.push(DecisionDef {
                name: format!("d{i}"),
                guard,
            });
        }
        let n = g.decisions.len();
        for j in 0..junctions {
            if self.coin() {
                let cspec = ControlSpec {
                    on_guard: self.guard(&g, n, 2),
                    off_guard: self.guard(&g, n, 2),
                    initial_state: if self.coin() { SwitchState::On } else { SwitchState::Off },
                };
                g.junctions[j].switched = true;
                g.junctions[j].cspec = Some(cspec);
            }
        }

        for i in 0..self.below(3) {
            let var = self.var(&g);
            let label = if self.coin() { format!("p{i}") } else { var.to_string() };
            if g.probes.iter().all(|p| p.label != label) {
                g.probes.push(Probe { label, var });
            }
        }
        g
    }
}
