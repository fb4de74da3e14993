//! Three-tank benchmark: model builder, piecewise-ODE oracle and closed forms.
//!
//! Tanks 1, 2, 3 sit in a row. Pump 1 fills tank 1 and pump 2 fills tank 3;
//! tanks 1 and 3 drain through R1 and R2. Pipe R12 joins tanks 1 and 2 at
//! height H12, pipe R23 joins tanks 2 and 3 at height H23. A pipe conducts
//! from whichever side has fluid above its height.

use std::fmt;

use thiserror::Error;

use crate::expr::{ArithOp, CmpOp, GuardExpr, NumExpr, VarRef};
use crate::model::{
    Bond, BondGraph, ControlSpec, DecisionDef, Element, ElementKind, Junction, JunctionKind, Mode, Parameter, Probe,
    SignalDef, SwitchState,
};
use crate::sim::{check_finite, ode_step, ModeEvent, SimConfig, SimError, SimTrace, Transition};

#[derive(Debug, Clone, PartialEq)]
pub struct TankParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub r1: f64,
    pub r12: f64,
    pub r23: f64,
    pub r2: f64,
    pub h12: f64,
    pub h23: f64,
    pub qp1: f64,
    pub qp2: f64,
    pub t10: f64,
    pub t20: f64,
}

impl Default for TankParams {
    fn default() -> Self {
        TankParams {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            r1: 1.0,
            r12: 1.0,
            r23: 1.0,
            r2: 1.0,
            h12: 0.5,
            h23: 0.7,
            qp1: 1.0,
            qp2: 0.5,
            t10: 1.0,
            t20: 3.0,
        }
    }
}

impl TankParams {
    pub fn validate(&self) -> Result<(), BenchError> {
        let positive = [
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("r1", self.r1),
            ("r12", self.r12),
            ("r23", self.r23),
            ("r2", self.r2),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(BenchError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("h12", self.h12), ("h23", self.h23)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(BenchError::InvalidParams(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("qp1", self.qp1),
            ("qp2", self.qp2),
            ("t10", self.t10),
            ("t20", self.t20),
        ] {
            if !v.is_finite() {
                return Err(BenchError::InvalidParams(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("invalid tank parameters: {0}")]
    InvalidParams(String),
    #[error("outside the formula's domain: {0}")]
    Domain(String),
    #[error("no probe named `{0}` in trace")]
    UnknownProbe(String),
    #[error("no configuration yields a consistent equilibrium")]
    NoEquilibrium,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Which sides of a pipe have fluid at or above the pipe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PipeConfig {
    BothBelow,
    LeftAbove,
    RightAbove,
    BothAbove,
}

impl PipeConfig {
    pub const ALL: [PipeConfig; 4] = [
        PipeConfig::BothBelow,
        PipeConfig::LeftAbove,
        PipeConfig::RightAbove,
        PipeConfig::BothAbove,
    ];

    pub fn classify(h_left: f64, h_right: f64, height: f64) -> Self {
        Self::from_sides(h_left >= height, h_right >= height)
    }

    pub fn from_sides(left: bool, right: bool) -> Self {
        match (left, right) {
            (false, false) => PipeConfig::BothBelow,
            (true, false) => PipeConfig::LeftAbove,
            (false, true) => PipeConfig::RightAbove,
            (true, true) => PipeConfig::BothAbove,
        }
    }

    pub fn sides(self) -> (bool, bool) {
        match self {
            PipeConfig::BothBelow => (false, false),
            PipeConfig::LeftAbove => (true, false),
            PipeConfig::RightAbove => (false, true),
            PipeConfig::BothAbove => (true, true),
        }
    }

    /// Flow left to right in this configuration.
    pub fn flow(self, h_left: f64, h_right: f64, height: f64, r: f64) -> f64 {
        match self {
            PipeConfig::BothBelow => 0.0,
            PipeConfig::LeftAbove => (h_left - height) / r,
            PipeConfig::RightAbove => -(h_right - height) / r,
            PipeConfig::BothAbove => (h_left - h_right) / r,
        }
    }

    pub fn roman(self) -> &'static str {
        match self {
            PipeConfig::BothBelow => "i",
            PipeConfig::LeftAbove => "ii",
            PipeConfig::RightAbove => "iii",
            PipeConfig::BothAbove => "iv",
        }
    }
}

impl fmt::Display for PipeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PipeConfig::BothBelow => "both-below",
            PipeConfig::LeftAbove => "left-above",
            PipeConfig::RightAbove => "right-above",
            PipeConfig::BothAbove => "both-above",
        })
    }
}

/// Pipe flow, positive from left to right.
pub fn pipe_flow(h_left: f64, h_right: f64, height: f64, r: f64) -> f64 {
    PipeConfig::classify(h_left, h_right, height).flow(h_left, h_right, height, r)
}

/// Switched junctions of [`build_three_tank`] in mode order.
pub const SWITCHED_JUNCTIONS: [&str; 8] = [
    "Pump1", "Pump2", "Drain1", "Drain2", "Pipe12L", "Pipe12R", "Pipe23L", "Pipe23R",
];

struct GraphBuilder {
    g: BondGraph,
}

impl GraphBuilder {
    fn element(&mut self, kind: ElementKind, name: &str, parameter: Parameter) {
        self.g.elements.push(Element {
            name: name.into(),
            kind,
            parameter,
        });
    }

    fn junction(&mut self, kind: JunctionKind, name: &str, cspec: Option<ControlSpec>) {
        self.g.junctions.push(match cspec {
            Some(c) => Junction::switched(name, kind, c),
            None => Junction::plain(name, kind),
        });
    }

    fn bond(&mut self, name: &str, from: &str, to: &str) {
        self.g.bonds.push(Bond {
            name: name.into(),
            from: from.into(),
            to: to.into(),
        });
    }

    fn signal(&mut self, name: &str, breakpoints: Vec<(f64, f64)>) {
        self.g.signals.push(SignalDef {
            name: name.into(),
            breakpoints,
        });
    }
}

fn follow(guard: GuardExpr, initial: SwitchState) -> ControlSpec {
    ControlSpec {
        on_guard: guard.clone(),
        off_guard: guard.not(),
        initial_state: initial,
    }
}

/// Hybrid bond graph of the three-tank system.
///
/// Each pipe is a switched 1-junction per side, each carrying an effort
/// source at the pipe height, around an unswitched 1-junction holding the
/// resistance:
///
/// ```text
/// T_a -> PipeL -> P -> PipeR -> T_b
///          |      |     ^
///          v      v     |
///         Se_L    R    Se_R
/// ```
///
/// so `e_R = on_L (h_a - H) - on_R (h_b - H)`. Two modulated flow sources
/// top up each tank by the difference between the pipe flow and what reaches
/// the tank through its side junction, so each tank sees the full pipe flow
/// in every configuration.
pub fn build_three_tank(p: &TankParams) -> BondGraph {
    let mut b = GraphBuilder {
        g: BondGraph::new("three_tank"),
    };
    let constant = Parameter::Constant;

    let switch_signal = |t0: f64| {
        if t0 <= 0.0 {
            vec![(0.0, 1.0)]
        } else {
            vec![(0.0, 0.0), (t0, 1.0)]
        }
    };
    b.signal("Pump1_Sw", switch_signal(p.t10));
    b.signal("Pump1_u", vec![(0.0, p.qp1)]);
    b.signal("Pump2_Sw", switch_signal(p.t20));
    b.signal("Pump2_u", vec![(0.0, p.qp2)]);
    b.signal("Valve", vec![(0.0, 1.0)]);

    let above = |tank: &str, h: f64| GuardExpr::cmp(NumExpr::effort(tank), CmpOp::Ge, NumExpr::Const(h));
    for (name, guard) in [
        ("AboveLeft_12", above("C1", p.h12)),
        ("AboveRight_12", above("C2", p.h12)),
        ("AboveLeft_23", above("C2", p.h23)),
        ("AboveRight_23", above("C3", p.h23)),
    ] {
        b.g.decisions.push(DecisionDef {
            name: name.into(),
            guard,
        });
    }

    b.element(ElementKind::C, "C1", constant(p.c1));
    b.element(ElementKind::C, "C2", constant(p.c2));
    b.element(ElementKind::C, "C3", constant(p.c3));
    b.element(ElementKind::Sf, "Sf1", Parameter::Signal("Pump1_u".into()));
    b.element(ElementKind::Sf, "Sf2", Parameter::Signal("Pump2_u".into()));
    b.element(ElementKind::R, "R1", constant(p.r1));
    b.element(ElementKind::R, "R2", constant(p.r2));

    for t in ["T1", "T2", "T3"] {
        b.junction(JunctionKind::Zero, t, None);
    }
    let signal = |s: &str| GuardExpr::Signal(s.into());
    b.junction(
        JunctionKind::One,
        "Pump1",
        Some(follow(signal("Pump1_Sw"), SwitchState::Off)),
    );
    b.junction(
        JunctionKind::One,
        "Pump2",
        Some(follow(signal("Pump2_Sw"), SwitchState::Off)),
    );
    b.junction(
        JunctionKind::One,
        "Drain1",
        Some(follow(signal("Valve"), SwitchState::On)),
    );
    b.junction(
        JunctionKind::One,
        "Drain2",
        Some(follow(signal("Valve"), SwitchState::On)),
    );

    for (i, t) in ["T1", "T2", "T3"].iter().enumerate() {
        b.bond(&format!("b_c{}", i + 1), t, &format!("C{}", i + 1));
    }
    b.bond("b_p1_src", "Sf1", "Pump1");
    b.bond("b_p1_out", "Pump1", "T1");
    b.bond("b_p2_src", "Sf2", "Pump2");
    b.bond("b_p2_out", "Pump2", "T3");
    b.bond("b_d1_in", "T1", "Drain1");
    b.bond("b_d1_r", "Drain1", "R1");
    b.bond("b_d2_in", "T3", "Drain2");
    b.bond("b_d2_r", "Drain2", "R2");

    for (id, left, right, height, r) in [("12", "T1", "T2", p.h12, p.r12), ("23", "T2", "T3", p.h23, p.r23)] {
        let n = |s: &str| s.replace('#', id);
        let decision = |side: &str| GuardExpr::Decision(format!("Above{side}_{id}"));
        b.element(ElementKind::R, &n("R#"), constant(r));
        b.element(ElementKind::Se, &n("Se#L"), constant(height));
        b.element(ElementKind::Se, &n("Se#R"), constant(height));
        let flow = |x: String| NumExpr::Var(VarRef::Flow(x));
        let diff = |a: NumExpr, c: NumExpr| Parameter::Modulation(NumExpr::binary(ArithOp::Sub, a, c));
        b.element(ElementKind::MSf, &n("MSf#a"), diff(flow(n("b#_l_in")), flow(n("b#_r"))));
        b.element(
            ElementKind::MSf,
            &n("MSf#b"),
            diff(flow(n("b#_r")), flow(n("b#_r_out"))),
        );
        b.junction(
            JunctionKind::One,
            &n("Pipe#L"),
            Some(follow(decision("Left"), SwitchState::Off)),
        );
        b.junction(JunctionKind::One, &n("P#"), None);
        b.junction(
            JunctionKind::One,
            &n("Pipe#R"),
            Some(follow(decision("Right"), SwitchState::Off)),
        );
        b.bond(&n("b#_l_in"), left, &n("Pipe#L"));
        b.bond(&n("b#_l_h"), &n("Pipe#L"), &n("Se#L"));
        b.bond(&n("b#_l_p"), &n("Pipe#L"), &n("P#"));
        b.bond(&n("b#_r"), &n("P#"), &n("R#"));
        b.bond(&n("b#_p_r"), &n("P#"), &n("Pipe#R"));
        b.bond(&n("b#_r_h"), &n("Se#R"), &n("Pipe#R"));
        b.bond(&n("b#_r_out"), &n("Pipe#R"), right);
        b.bond(&n("b#_ma"), &n("MSf#a"), left);
        b.bond(&n("b#_mb"), &n("MSf#b"), right);
    }

    for i in 1..=3 {
        b.g.probes.push(Probe {
            label: format!("h{i}"),
            var: VarRef::Effort(format!("C{i}")),
        });
    }
    b.g
}

/// Discrete state of the oracle, latched between steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Latch {
    pub pump1: bool,
    pub pump2: bool,
    pub pipe12: PipeConfig,
    pub pipe23: PipeConfig,
}

impl Latch {
    pub fn initial() -> Self {
        Latch {
            pump1: false,
            pump2: false,
            pipe12: PipeConfig::BothBelow,
            pipe23: PipeConfig::BothBelow,
        }
    }

    /// Configuration implied by levels `h` at time `t`.
    pub fn at(h: &[f64; 3], t: f64, p: &TankParams) -> Self {
        Latch {
            pump1: t >= p.t10,
            pump2: t >= p.t20,
            pipe12: PipeConfig::classify(h[0], h[1], p.h12),
            pipe23: PipeConfig::classify(h[1], h[2], p.h23),
        }
    }

    /// The same configuration as a mode of [`build_three_tank`]; drains are
    /// always open.
    pub fn mode(&self) -> Mode {
        let (a, b) = self.pipe12.sides();
        let (c, d) = self.pipe23.sides();
        Mode(vec![self.pump1, self.pump2, true, true, a, b, c, d])
    }
}

/// Tank level derivatives in a fixed configuration.
pub fn latched_rhs(h: &[f64; 3], latch: &Latch, p: &TankParams) -> [f64; 3] {
    let q12 = latch.pipe12.flow(h[0], h[1], p.h12, p.r12);
    let q23 = latch.pipe23.flow(h[1], h[2], p.h23, p.r23);
    let pump1 = if latch.pump1 { p.qp1 } else { 0.0 };
    let pump2 = if latch.pump2 { p.qp2 } else { 0.0 };
    [
        (pump1 - h[0] / p.r1 - q12) / p.c1,
        (q12 - q23) / p.c2,
        (pump2 + q23 - h[2] / p.r2) / p.c3,
    ]
}

/// Level derivatives with pumps and pipes following time and levels directly.
pub fn oracle_rhs(h: &[f64; 3], t: f64, p: &TankParams) -> [f64; 3] {
    latched_rhs(h, &Latch::at(h, t, p), p)
}

/// Integrates the tank equations with the configuration latched at step
/// boundaries from the post-step levels, the same convention as the hybrid
/// simulator.
pub fn oracle_simulate(p: &TankParams, cfg: &SimConfig) -> Result<(SimTrace, Vec<Latch>), BenchError> {
    p.validate()?;
    cfg.validate(3)?;
    let names: Vec<String> = (1..=3).map(|i| format!("C{i}")).collect();
    let mut h = match &cfg.initial_state {
        Some(x) => [x[0], x[1], x[2]],
        None => [0.0; 3],
    };
    check_finite(&h, &names, 0.0)?;
    let mut latch = Latch::initial();
    let mut trace = SimTrace {
        probe_labels: vec!["h1".into(), "h2".into(), "h3".into()],
        probes: vec![Vec::new(); 3],
        state_names: names.clone(),
        ..Default::default()
    };
    let mut latches = Vec::new();
    let mut record = |trace: &mut SimTrace, t: f64, h: &[f64; 3], latch: &Latch| {
        trace.times.push(t);
        for (column, v) in trace.probes.iter_mut().zip(h) {
            column.push(*v);
        }
        trace.states.push(h.to_vec());
        trace.modes.push(latch.mode());
        latches.push(*latch);
    };
    record(&mut trace, 0.0, &h, &latch);

    for k in 0..cfg.steps() {
        let t = cfg.time_at(k);
        let t_next = cfg.time_at(k + 1);
        let mut f = |x: &[f64], _t: f64| -> Result<Vec<f64>, SimError> {
            Ok(latched_rhs(&[x[0], x[1], x[2]], &latch, p).to_vec())
        };
        let x = ode_step(&mut f, &h, t, cfg.dt, cfg.integrator)?;
        check_finite(&x, &names, t_next)?;
        h = [x[0], x[1], x[2]];
        let next = Latch::at(&h, t_next, p);
        let before = latch.mode();
        let after = next.mode();
        for (slot, name) in SWITCHED_JUNCTIONS.iter().enumerate() {
            if before.bit(slot) != after.bit(slot) {
                trace.events.push(ModeEvent {
                    time: t_next,
                    junction: (*name).into(),
                    transition: if after.bit(slot) {
                        Transition::OffToOn
                    } else {
                        Transition::OnToOff
                    },
                });
            }
        }
        latch = next;
        if (k + 1) % cfg.record_every == 0 {
            record(&mut trace, t_next, &h, &latch);
        }
    }
    Ok((trace, latches))
}

/// Tank 1 level while only pump 1 acts on it, from empty at `t10`. Assumes
/// unit capacitance, resistance and pump flow.
pub fn analytic_h1_mode_i(t: f64, p: &TankParams) -> Result<f64, BenchError> {
    if t < p.t10 {
        return Err(BenchError::Domain(format!("t={t} precedes pump start {}", p.t10)));
    }
    Ok(1.0 - (-(t - p.t10)).exp())
}

/// Tank 2 level `tau` seconds after pipe R12 starts conducting from the left,
/// with unit parameters.
pub fn analytic_h2_mode_ii(tau: f64) -> Result<f64, BenchError> {
    if tau < 0.0 {
        return Err(BenchError::Domain(format!("tau={tau} is negative")));
    }
    Ok(tau / 4.0 - 1.0 / 8.0 + (-2.0 * tau).exp() / 8.0)
}

/// First time the probe reaches `level`, interpolated between samples.
pub fn crossing_time(trace: &SimTrace, probe: &str, level: f64) -> Result<Option<f64>, BenchError> {
    let v = trace
        .probe(probe)
        .ok_or_else(|| BenchError::UnknownProbe(probe.into()))?;
    let Some(i) = v.iter().position(|&x| x >= level) else {
        return Ok(None);
    };
    if i == 0 {
        return Ok(Some(trace.times[0]));
    }
    let (t0, t1) = (trace.times[i - 1], trace.times[i]);
    let (v0, v1) = (v[i - 1], v[i]);
    Ok(Some(t0 + (level - v0) / (v1 - v0) * (t1 - t0)))
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if d.abs() < 1e-12 {
        return None;
    }
    let mut x = [0.0; 3];
    for (col, xi) in x.iter_mut().enumerate() {
        let mut m = a;
        for row in 0..3 {
            m[row][col] = b[row];
        }
        *xi = det(m) / d;
    }
    Some(x)
}

/// Long-run levels with both pumps running.
///
/// Each pair of pipe configurations makes the balance linear; the first pair
/// whose solution reproduces its own configurations is returned. Tank 2 with
/// both pipes closed keeps the level it started with, taken as empty.
pub fn steady_state(p: &TankParams) -> Result<[f64; 3], BenchError> {
    p.validate()?;
    for c12 in PipeConfig::ALL {
        for c23 in PipeConfig::ALL {
            let (al, ar) = c12.sides();
            let (bl, br) = c23.sides();
            let f = |x: bool| if x { 1.0 } else { 0.0 };
            let (al, ar, bl, br) = (f(al), f(ar), f(bl), f(br));
            // q12 = (al h1 - ar h2)/R12 - k12, q23 = (bl h2 - br h3)/R23 - k23
            let k12 = (al - ar) * p.h12 / p.r12;
            let k23 = (bl - br) * p.h23 / p.r23;
            let mut a = [
                [1.0 / p.r1 + al / p.r12, -ar / p.r12, 0.0],
                [al / p.r12, -ar / p.r12 - bl / p.r23, br / p.r23],
                [0.0, -bl / p.r23, br / p.r23 + 1.0 / p.r2],
            ];
            let mut rhs = [p.qp1 + k12, k12 - k23, p.qp2 - k23];
            let isolated = a.iter().all(|row| row[1] == 0.0);
            if isolated {
                // h2 is free; pin it to zero and keep the row as a check
                a[1] = [0.0, 1.0, 0.0];
                rhs[1] = 0.0;
            }
            let Some(h) = solve3(a, rhs) else { continue };
            if isolated {
                let q12 = c12.flow(h[0], h[1], p.h12, p.r12);
                let q23 = c23.flow(h[1], h[2], p.h23, p.r23);
                if (q12 - q23).abs() > 1e-12 {
                    continue;
                }
            }
            if PipeConfig::classify(h[0], h[1], p.h12) == c12 && PipeConfig::classify(h[1], h[2], p.h23) == c23 {
                return Ok(h);
            }
        }
    }
    Err(BenchError::NoEquilibrium)
}

/// One benchmark check with its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub expected: f64,
    pub tolerance: f64,
    /// Digits shown when printing.
    pub digits: usize,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value.is_some_and(|v| (v - self.expected).abs() <= self.tolerance)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.digits;
        let value = match self.value {
            Some(v) => format!("{v:.d$}"),
            None => "none".into(),
        };
        write!(
            f,
            "{}={value} (expected {:.e$}±{}) {}",
            self.name,
            self.expected,
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" },
            e = d + 1,
        )
    }
}

/// Crossing times of the first two pipe openings and the steady state after
/// 60 s, each against its expected value.
pub fn scenario_checks<F>(p: &TankParams, mut run: F) -> Result<Vec<Check>, BenchError>
where
    F: FnMut(&SimConfig) -> Result<SimTrace, BenchError>,
{
    let trace = run(&SimConfig::default())?;
    let mut checks = vec![
        Check {
            name: "t1".into(),
            value: crossing_time(&trace, "h1", p.h12)?,
            expected: p.t10 + 2f64.ln(),
            tolerance: 0.02,
            digits: 2,
        },
        Check {
            name: "t2".into(),
            value: crossing_time(&trace, "h2", p.h12)?,
            expected: 4.19,
            tolerance: 0.05,
            digits: 2,
        },
    ];
    let long = run(&SimConfig {
        t_end: 60.0,
        ..Default::default()
    })?;
    let expected = steady_state(p)?;
    for (i, e) in expected.iter().enumerate() {
        let label = format!("h{}", i + 1);
        checks.push(Check {
            value: long.probe(&label).and_then(|v| v.last().copied()),
            name: format!("{label}(60)"),
            expected: *e,
            tolerance: 1e-3,
            digits: 3,
        });
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::validate_graph;

    #[test]
    fn pipe_flow_configurations() {
        assert_eq!(pipe_flow(0.4, 0.3, 0.5, 1.0), 0.0);
        assert!((pipe_flow(0.6, 0.3, 0.5, 1.0) - 0.1).abs() < 1e-15);
        assert!((pipe_flow(0.3, 0.9, 0.5, 1.0) + 0.4).abs() < 1e-15);
        assert!((pipe_flow(0.8, 0.6, 0.5, 1.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn pipe_flow_is_continuous_and_antisymmetric() {
        let h = 0.5;
        for other in [0.0, 0.2, 0.5, 0.7, 1.3] {
            let r_side = other >= h;
            let left_edge = [false, true].map(|l| PipeConfig::from_sides(l, r_side).flow(h, other, h, 2.0));
            assert_eq!(left_edge[0], left_edge[1]);
            let l_side = other >= h;
            let right_edge = [false, true].map(|r| PipeConfig::from_sides(l_side, r).flow(other, h, h, 2.0));
            assert_eq!(right_edge[0], right_edge[1]);
            for x in [0.0, 0.4, 0.6, 1.1] {
                assert_eq!(pipe_flow(x, other, h, 2.0), -pipe_flow(other, x, h, 2.0));
            }
        }
    }

    #[test]
    fn oracle_rhs_examples() {
        let p = TankParams::default();
        assert_eq!(oracle_rhs(&[0.0; 3], 0.5, &p), [0.0; 3]);
        let d = oracle_rhs(&[0.6, 0.2, 0.0], 2.0, &p);
        assert!((d[0] - 0.3).abs() < 1e-15);
        assert!((d[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn three_tank_graph_is_valid() {
        let g = build_three_tank(&TankParams::default());
        assert!(validate_graph(&g).is_empty(), "{:?}", validate_graph(&g));
        let names: Vec<&str> = g
            .switched_junctions()
            .into_iter()
            .map(|j| g.junctions[j].name.as_str())
            .collect();
        assert_eq!(names, SWITCHED_JUNCTIONS);
        assert_eq!(
            g.decision("AboveRight_12").unwrap().guard.to_string(),
            "(effort(C2) >= 0.5)"
        );
    }

    #[test]
    fn analytic_forms() {
        let p = TankParams::default();
        assert_eq!(analytic_h1_mode_i(1.0, &p).unwrap(), 0.0);
        assert!((analytic_h1_mode_i(1.0 + 2f64.ln(), &p).unwrap() - 0.5).abs() < 1e-15);
        assert!(analytic_h1_mode_i(0.5, &p).is_err());
        assert_eq!(analytic_h2_mode_ii(0.0).unwrap(), 0.0);
        assert!((analytic_h2_mode_ii(2.5).unwrap() - 0.5).abs() < 1e-3);
        assert!(analytic_h2_mode_ii(-0.1).is_err());
    }

    #[test]
    fn steady_states() {
        let h = steady_state(&TankParams::default()).unwrap();
        for (x, e) in h.iter().zip([0.9, 0.8, 0.6]) {
            assert!((x - e).abs() < 1e-12, "{h:?}");
        }
        let off = TankParams {
            qp1: 0.0,
            qp2: 0.0,
            ..Default::default()
        };
        assert_eq!(steady_state(&off).unwrap(), [0.0; 3]);
        let right_only = TankParams {
            qp1: 0.0,
            ..Default::default()
        };
        let h = steady_state(&right_only).unwrap();
        assert!(h[0].abs() < 1e-15 && h[1].abs() < 1e-15 && (h[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn crossing_time_interpolates() {
        let trace = SimTrace {
            times: vec![0.0, 1.0, 2.0],
            probe_labels: vec!["x".into()],
            probes: vec![vec![0.0, 0.4, 0.8]],
            ..Default::default()
        };
        assert!((crossing_time(&trace, "x", 0.6).unwrap().unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(crossing_time(&trace, "x", 0.9).unwrap(), None);
        assert!(matches!(
            crossing_time(&trace, "y", 0.5),
            Err(BenchError::UnknownProbe(_))
        ));
    }

    #[test]
    fn oracle_with_pumps_off_stays_empty() {
        let p = TankParams {
            qp1: 0.0,
            qp2: 0.0,
            ..Default::default()
        };
        let (trace, _) = oracle_simulate(&p, &SimConfig::default()).unwrap();
        assert!(trace.probes.iter().flatten().all(|&v| v == 0.0));
    }
}
