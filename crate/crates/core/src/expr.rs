//! Guard and arithmetic expressions, their evaluation, and the two-state
//! junction automaton step.
//!
//! `Display` on both expression types produces the canonical, fully
//! parenthesized text form used by the model serializer.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::model::{ControlSpec, SwitchState};

/// A model variable readable by guards, modulations and probes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarRef {
    /// Effort of an element, a 0-junction, or a bond.
    Effort(String),
    /// Flow of an element, a 1-junction, or a bond.
    Flow(String),
    /// Current value of a piecewise-constant signal.
    Signal(String),
}

impl VarRef {
    pub fn name(&self) -> &str {
        match self {
            VarRef::Effort(n) | VarRef::Flow(n) | VarRef::Signal(n) => n,
        }
    }
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarRef::Effort(n) => write!(f, "effort({n})"),
            VarRef::Flow(n) => write!(f, "flow({n})"),
            VarRef::Signal(n) => write!(f, "signal({n})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Ge,
    Gt,
    Eq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
            CmpOp::Eq => "==",
        }
    }

    pub fn apply(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
            CmpOp::Eq => a == b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    /// Euclidean remainder; makes periodic time guards expressible.
    Rem,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
            ArithOp::Rem => "%",
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            ArithOp::Add => a + b,
            ArithOp::Sub => a - b,
            ArithOp::Mul => a * b,
            ArithOp::Div => a / b,
            ArithOp::Rem => a.rem_euclid(b),
        }
    }
}

/// Real-valued expression.
#[derive(Debug, Clone, PartialEq)]
pub enum NumExpr {
    Const(f64),
    Time,
    Var(VarRef),
    Binary {
        op: ArithOp,
        lhs: Box<NumExpr>,
        rhs: Box<NumExpr>,
    },
}

impl NumExpr {
    pub fn binary(op: ArithOp, lhs: NumExpr, rhs: NumExpr) -> Self {
        NumExpr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn effort(name: &str) -> Self {
        NumExpr::Var(VarRef::Effort(name.into()))
    }

    pub fn flow(name: &str) -> Self {
        NumExpr::Var(VarRef::Flow(name.into()))
    }

    pub fn references(&self) -> Vec<VarRef> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs(&self, out: &mut Vec<VarRef>) {
        match self {
            NumExpr::Const(_) | NumExpr::Time => {}
            NumExpr::Var(v) => out.push(v.clone()),
            NumExpr::Binary { lhs, rhs, .. } => {
                lhs.collect_refs(out);
                rhs.collect_refs(out);
            }
        }
    }

    /// True when every literal in the expression is finite.
    pub fn all_finite(&self) -> bool {
        match self {
            NumExpr::Const(v) => v.is_finite(),
            NumExpr::Time | NumExpr::Var(_) => true,
            NumExpr::Binary { lhs, rhs, .. } => lhs.all_finite() && rhs.all_finite(),
        }
    }

    pub fn eval(&self, env: &dyn Valuation) -> Result<f64, GuardError> {
        match self {
            NumExpr::Const(v) => Ok(*v),
            NumExpr::Time => Ok(env.time()),
            NumExpr::Var(v) => lookup(env, v),
            NumExpr::Binary { op, lhs, rhs } => Ok(op.apply(lhs.eval(env)?, rhs.eval(env)?)),
        }
    }
}

fn lookup(env: &dyn Valuation, v: &VarRef) -> Result<f64, GuardError> {
    let value = match v {
        VarRef::Effort(n) => env.effort(n),
        VarRef::Flow(n) => env.flow(n),
        VarRef::Signal(n) => env.signal(n),
    };
    value.ok_or_else(|| GuardError::UnboundVariable(v.to_string()))
}

/// Boolean guard expression.
#[derive(Debug, Clone, PartialEq)]
pub enum GuardExpr {
    Const(bool),
    /// Reference to a named decision function.
    Decision(String),
    /// A signal used as a boolean: true iff its value is non-zero.
    Signal(String),
    Not(Box<GuardExpr>),
    And(Box<GuardExpr>, Box<GuardExpr>),
    Or(Box<GuardExpr>, Box<GuardExpr>),
    Compare {
        op: CmpOp,
        lhs: NumExpr,
        rhs: NumExpr,
    },
}

impl GuardExpr {
    pub fn cmp(lhs: NumExpr, op: CmpOp, rhs: NumExpr) -> Self {
        GuardExpr::Compare { op, lhs, rhs }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        GuardExpr::Not(Box::new(self))
    }

    pub fn and(self, other: GuardExpr) -> Self {
        GuardExpr::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: GuardExpr) -> Self {
        GuardExpr::Or(Box::new(self), Box::new(other))
    }

    /// Variables read directly by this guard (decision bodies excluded).
    pub fn references(&self) -> Vec<VarRef> {
        let mut out = Vec::new();
        self.walk(&mut |g| match g {
            GuardExpr::Signal(s) => out.push(VarRef::Signal(s.clone())),
            GuardExpr::Compare { lhs, rhs, .. } => {
                out.extend(lhs.references());
                out.extend(rhs.references());
            }
            _ => {}
        });
        out
    }

    /// Decision functions referenced directly by this guard.
    pub fn decisions(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.walk(&mut |g| {
            if let GuardExpr::Decision(d) = g {
                out.push(d.clone());
            }
        });
        out
    }

    /// Whether the guard reads `time` anywhere (decision bodies excluded).
    pub fn reads_time(&self) -> bool {
        fn num(e: &NumExpr) -> bool {
            match e {
                NumExpr::Time => true,
                NumExpr::Binary { lhs, rhs, .. } => num(lhs) || num(rhs),
                _ => false,
            }
        }
        let mut found = false;
        self.walk(&mut |g| {
            if let GuardExpr::Compare { lhs, rhs, .. } = g {
                found |= num(lhs) || num(rhs);
            }
        });
        found
    }

    /// True when every numeric literal in the guard is finite.
    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.walk(&mut |g| {
            if let GuardExpr::Compare { lhs, rhs, .. } = g {
                ok &= lhs.all_finite() && rhs.all_finite();
            }
        });
        ok
    }

    fn walk(&self, f: &mut dyn FnMut(&GuardExpr)) {
        f(self);
        match self {
            GuardExpr::Not(a) => a.walk(f),
            GuardExpr::And(a, b) | GuardExpr::Or(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            _ => {}
        }
    }

    pub fn eval(&self, env: &dyn Valuation) -> Result<bool, GuardError> {
        self.eval_depth(env, 0)
    }

    fn eval_depth(&self, env: &dyn Valuation, depth: usize) -> Result<bool, GuardError> {
        match self {
            GuardExpr::Const(b) => Ok(*b),
            GuardExpr::Decision(name) => {
                if depth > MAX_DECISION_DEPTH {
                    return Err(GuardError::CyclicDecision(name.clone()));
                }
                let body = env
                    .decision(name)
                    .ok_or_else(|| GuardError::UnboundVariable(name.clone()))?;
                body.eval_depth(env, depth + 1)
            }
            GuardExpr::Signal(name) => Ok(lookup(env, &VarRef::Signal(name.clone()))? != 0.0),
            GuardExpr::Not(a) => Ok(!a.eval_depth(env, depth)?),
            GuardExpr::And(a, b) => Ok(a.eval_depth(env, depth)? && b.eval_depth(env, depth)?),
            GuardExpr::Or(a, b) => Ok(a.eval_depth(env, depth)? || b.eval_depth(env, depth)?),
            GuardExpr::Compare { op, lhs, rhs } => Ok(op.apply(lhs.eval(env)?, rhs.eval(env)?)),
        }
    }
}

const MAX_DECISION_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GuardError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("decision `{0}` refers to itself")]
    CyclicDecision(String),
}

/// Source of variable values for expression evaluation.
pub trait Valuation {
    fn effort(&self, name: &str) -> Option<f64>;
    fn flow(&self, name: &str) -> Option<f64>;
    fn signal(&self, name: &str) -> Option<f64>;
    fn time(&self) -> f64;
    fn decision(&self, name: &str) -> Option<&GuardExpr>;
}

/// Explicit variable bindings, mostly for tests and the Python bindings.
#[derive(Debug, Clone, Default)]
pub struct MapValuation {
    pub time: f64,
    pub efforts: HashMap<String, f64>,
    pub flows: HashMap<String, f64>,
    pub signals: HashMap<String, f64>,
    pub decisions: HashMap<String, GuardExpr>,
}

impl MapValuation {
    pub fn at(time: f64) -> Self {
        MapValuation {
            time,
            ..Default::default()
        }
    }

    pub fn with_effort(mut self, name: &str, v: f64) -> Self {
        self.efforts.insert(name.into(), v);
        self
    }

    pub fn with_flow(mut self, name: &str, v: f64) -> Self {
        self.flows.insert(name.into(), v);
        self
    }

    pub fn with_signal(mut self, name: &str, v: f64) -> Self {
        self.signals.insert(name.into(), v);
        self
    }

    pub fn with_decision(mut self, name: &str, g: GuardExpr) -> Self {
        self.decisions.insert(name.into(), g);
        self
    }
}

impl Valuation for MapValuation {
    fn effort(&self, name: &str) -> Option<f64> {
        self.efforts.get(name).copied()
    }
    fn flow(&self, name: &str) -> Option<f64> {
        self.flows.get(name).copied()
    }
    fn signal(&self, name: &str) -> Option<f64> {
        self.signals.get(name).copied()
    }
    fn time(&self) -> f64 {
        self.time
    }
    fn decision(&self, name: &str) -> Option<&GuardExpr> {
        self.decisions.get(name)
    }
}

pub fn eval_guard(expr: &GuardExpr, env: &dyn Valuation) -> Result<bool, GuardError> {
    expr.eval(env)
}

/// One transition attempt of a junction automaton. Only the guard leaving
/// `state` is evaluated.
pub fn step_automaton(cspec: &ControlSpec, state: SwitchState, env: &dyn Valuation) -> Result<SwitchState, GuardError> {
    Ok(match state {
        SwitchState::Off if cspec.on_guard.eval(env)? => SwitchState::On,
        SwitchState::On if cspec.off_guard.eval(env)? => SwitchState::Off,
        s => s,
    })
}

/// Shortest text that parses back to exactly `v`.
pub fn format_number(v: f64) -> String {
    format!("{v:?}")
}

impl fmt::Display for NumExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumExpr::Const(v) => f.write_str(&format_number(*v)),
            NumExpr::Time => f.write_str("time"),
            NumExpr::Var(v) => write!(f, "{v}"),
            NumExpr::Binary { op, lhs, rhs } => write!(f, "({lhs} {} {rhs})", op.symbol()),
        }
    }
}

impl fmt::Display for GuardExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GuardExpr::Const(b) => write!(f, "{b}"),
            GuardExpr::Decision(d) => f.write_str(d),
            GuardExpr::Signal(s) => write!(f, "signal({s})"),
            GuardExpr::Not(a) => write!(f, "(not {a})"),
            GuardExpr::And(a, b) => write!(f, "({a} and {b})"),
            GuardExpr::Or(a, b) => write!(f, "({a} or {b})"),
            GuardExpr::Compare { op, lhs, rhs } => write!(f, "({lhs} {} {rhs})", op.symbol()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn above(node: &str, level: f64) -> GuardExpr {
        GuardExpr::cmp(NumExpr::effort(node), CmpOp::Ge, NumExpr::Const(level))
    }

    #[test]
    fn closed_lower_bound_at_threshold() {
        let g = above("C1", 0.5);
        assert!(g.eval(&MapValuation::at(0.0).with_effort("C1", 0.5)).unwrap());
        assert!(!g.eval(&MapValuation::at(0.0).with_effort("C1", 0.49)).unwrap());
        let below = GuardExpr::cmp(NumExpr::effort("C1"), CmpOp::Lt, NumExpr::Const(0.5));
        assert!(!below.eval(&MapValuation::at(0.0).with_effort("C1", 0.5)).unwrap());
    }

    #[test]
    fn time_and_signal_guard() {
        let g = GuardExpr::cmp(NumExpr::Time, CmpOp::Ge, NumExpr::Const(1.0)).and(GuardExpr::Signal("Pump_Sw".into()));
        let env = MapValuation::at(2.0).with_signal("Pump_Sw", 1.0);
        assert!(g.eval(&env).unwrap());
        let env = MapValuation::at(0.5).with_signal("Pump_Sw", 1.0);
        assert!(!g.eval(&env).unwrap());
    }

    #[test]
    fn unbound_variable_is_reported() {
        let g = above("C9", 0.5);
        assert_eq!(
            g.eval(&MapValuation::at(0.0)),
            Err(GuardError::UnboundVariable("effort(C9)".into()))
        );
    }

    #[test]
    fn decisions_resolve_through_env_and_cycles_stop() {
        let env = MapValuation::at(0.0)
            .with_effort("C1", 0.7)
            .with_decision("Above", above("C1", 0.5));
        assert!(GuardExpr::Decision("Above".into()).eval(&env).unwrap());

        let env = MapValuation::at(0.0).with_decision("Loop", GuardExpr::Decision("Loop".into()));
        assert_eq!(
            GuardExpr::Decision("Loop".into()).eval(&env),
            Err(GuardError::CyclicDecision("Loop".into()))
        );
    }

    #[test]
    fn automaton_consults_only_the_outgoing_guard() {
        let cspec = ControlSpec {
            on_guard: GuardExpr::Signal("S".into()),
            off_guard: GuardExpr::Signal("S".into()).not(),
            initial_state: SwitchState::Off,
        };
        let on = MapValuation::at(0.0).with_signal("S", 1.0);
        let off = MapValuation::at(0.0).with_signal("S", 0.0);
        assert_eq!(step_automaton(&cspec, SwitchState::Off, &on).unwrap(), SwitchState::On);
        assert_eq!(
            step_automaton(&cspec, SwitchState::Off, &off).unwrap(),
            SwitchState::Off
        );
        assert_eq!(step_automaton(&cspec, SwitchState::On, &on).unwrap(), SwitchState::On);
        assert_eq!(step_automaton(&cspec, SwitchState::On, &off).unwrap(), SwitchState::Off);

        // an unbound on-guard is never evaluated while on
        let lazy = ControlSpec {
            on_guard: above("missing", 0.0),
            off_guard: GuardExpr::Const(false),
            initial_state: SwitchState::On,
        };
        assert_eq!(
            step_automaton(&lazy, SwitchState::On, &MapValuation::at(0.0)).unwrap(),
            SwitchState::On
        );
    }

    #[test]
    fn pipe_guard_fires_when_level_reaches_pipe() {
        let cspec = ControlSpec {
            on_guard: above("C1", 0.5),
            off_guard: above("C1", 0.5).not(),
            initial_state: SwitchState::Off,
        };
        let below = MapValuation::at(1.69).with_effort("C1", 0.4984);
        let at = MapValuation::at(1.70).with_effort("C1", 0.5034);
        assert_eq!(
            step_automaton(&cspec, SwitchState::Off, &below).unwrap(),
            SwitchState::Off
        );
        assert_eq!(step_automaton(&cspec, SwitchState::Off, &at).unwrap(), SwitchState::On);
    }

    #[test]
    fn canonical_text_is_fully_parenthesized() {
        let g = above("C1", 0.5).and(GuardExpr::Signal("S".into()).not());
        assert_eq!(g.to_string(), "((effort(C1) >= 0.5) and (not signal(S)))");
        let e = NumExpr::binary(ArithOp::Rem, NumExpr::Time, NumExpr::Const(2.0));
        assert_eq!(e.to_string(), "(time % 2.0)");
    }

    #[test]
    fn remainder_is_euclidean() {
        assert_eq!(ArithOp::Rem.apply(3.0, 2.0), 1.0);
        assert_eq!(ArithOp::Rem.apply(-1.0, 2.0), 1.0);
    }
}
