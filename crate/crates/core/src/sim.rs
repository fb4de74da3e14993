//! Fixed-step hybrid simulation of a compiled block diagram.
//!
//! Each step integrates under the current mode, evaluates every guard once on
//! the post-step values, applies all junction flips together, then records.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::expr::{step_automaton, GuardError, Valuation};
use crate::ibd::{evaluate_pass, BlockDiagram, EvalError, Pass, PassValuation};
use crate::model::{initial_mode, Mode, SwitchState};

/// Largest state magnitude accepted before a run is declared divergent.
pub const BLOWUP_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntegratorKind {
    Euler,
    #[default]
    Rk4,
}

impl FromStr for IntegratorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euler" => Ok(IntegratorKind::Euler),
            "rk4" => Ok(IntegratorKind::Rk4),
            other => Err(format!("unknown integrator `{other}` (expected euler or rk4)")),
        }
    }
}

impl fmt::Display for IntegratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntegratorKind::Euler => "euler",
            IntegratorKind::Rk4 => "rk4",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub integrator: IntegratorKind,
    /// Effort per C and flow per I in state order; `None` starts at rest.
    pub initial_state: Option<Vec<f64>>,
    pub record_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.01,
            t_end: 10.0,
            integrator: IntegratorKind::Rk4,
            initial_state: None,
            record_every: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, states: usize) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be non-negative, got {}", self.t_end));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if let Some(x) = &self.initial_state {
            if x.len() != states {
                return bad(format!(
                    "initial state has {} entries, model has {states} storages",
                    x.len()
                ));
            }
        }
        Ok(())
    }

    /// Number of steps taken; `t_end` is reached up to rounding.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt + 1e-9).floor() as usize
    }

    /// Time after `k` steps, computed without accumulating rounding. When
    /// `dt` is the reciprocal of an integer the time is `k / n`, which is
    /// the nearest double to the decimal grid point (0.07 rather than
    /// 0.07000000000000001).
    pub fn time_at(&self, k: usize) -> f64 {
        let per_second = (1.0 / self.dt).round();
        if per_second >= 1.0 && ((1.0 / per_second) - self.dt).abs() <= 1e-15 * self.dt {
            k as f64 / per_second
        } else {
            k as f64 * self.dt
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    OffToOn,
    OnToOff,
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transition::OffToOn => "off->on",
            Transition::OnToOff => "on->off",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeEvent {
    pub time: f64,
    pub junction: String,
    pub transition: Transition,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub times: Vec<f64>,
    pub probe_labels: Vec<String>,
    /// One vector per probe, aligned with `times`.
    pub probes: Vec<Vec<f64>>,
    pub state_names: Vec<String>,
    /// State vector at each recorded time.
    pub states: Vec<Vec<f64>>,
    pub modes: Vec<Mode>,
    pub events: Vec<ModeEvent>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn probe(&self, label: &str) -> Option<&[f64]> {
        let i = self.probe_labels.iter().position(|l| l == label)?;
        Some(&self.probes[i])
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("numerical blowup at t={time}: `{variable}` = {value}")]
    NumericalBlowup { time: f64, variable: String, value: f64 },
    #[error("guard evaluation failed at t={time}: {source}")]
    Guard { time: f64, source: GuardError },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Right-hand side `ẋ = f(x, t)`.
pub type Rhs<'a, E> = dyn FnMut(&[f64], f64) -> Result<Vec<f64>, E> + 'a;

/// One explicit step of `ẋ = f(x, t)`. Used by the engine and by the
/// benchmark oracle so both discretize identically.
pub fn ode_step<E>(f: &mut Rhs<'_, E>, x: &[f64], t: f64, dt: f64, method: IntegratorKind) -> Result<Vec<f64>, E> {
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(x, k)| x + a * k).collect() };
    match method {
        IntegratorKind::Euler => {
            let k1 = f(x, t)?;
            Ok(axpy(dt, &k1))
        }
        IntegratorKind::Rk4 => {
            let k1 = f(x, t)?;
            let k2 = f(&axpy(dt / 2.0, &k1), t + dt / 2.0)?;
            let k3 = f(&axpy(dt / 2.0, &k2), t + dt / 2.0)?;
            let k4 = f(&axpy(dt, &k3), t + dt)?;
            Ok(x.iter()
                .enumerate()
                .map(|(i, x)| x + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect())
        }
    }
}

/// Everything an observer sees of one diagram evaluation.
pub struct Observation<'a> {
    pub time: f64,
    pub state: &'a [f64],
    pub mode: &'a Mode,
    pub pass: &'a Pass,
}

/// Advances the state one step with `mode` held for every stage.
pub fn integrate_step(
    d: &BlockDiagram,
    state: &[f64],
    t: f64,
    mode: &Mode,
    dt: f64,
    method: IntegratorKind,
) -> Result<Vec<f64>, SimError> {
    integrate_observed(d, state, t, mode, dt, method, &mut |_| {})
}

fn integrate_observed(
    d: &BlockDiagram,
    state: &[f64],
    t: f64,
    mode: &Mode,
    dt: f64,
    method: IntegratorKind,
    observer: &mut dyn FnMut(&Observation),
) -> Result<Vec<f64>, SimError> {
    let mut rhs = |x: &[f64], t: f64| -> Result<Vec<f64>, SimError> {
        let pass = evaluate_pass(d, x, t, mode)?;
        observer(&Observation {
            time: t,
            state: x,
            mode,
            pass: &pass,
        });
        Ok(pass.derivatives)
    };
    ode_step(&mut rhs, state, t, dt, method)
}

/// Evaluates every switched junction's automaton against one valuation and
/// returns the new mode with the junctions (by slot) that flipped.
pub fn update_mode(
    d: &BlockDiagram,
    mode: &Mode,
    env: &dyn Valuation,
) -> Result<(Mode, Vec<(usize, Transition)>), GuardError> {
    let g = &d.graph;
    let mut next = mode.clone();
    let mut flips = Vec::new();
    for (slot, &j) in g.switched_junctions().iter().enumerate() {
        let Some(cspec) = &g.junctions[j].cspec else {
            continue;
        };
        let before = SwitchState::from(mode.bit(slot));
        let after = step_automaton(cspec, before, env)?;
        if after != before {
            next.0[slot] = after.is_on();
            flips.push((
                slot,
                if after.is_on() {
                    Transition::OffToOn
                } else {
                    Transition::OnToOff
                },
            ));
        }
    }
    Ok((next, flips))
}

pub fn simulate(d: &BlockDiagram, cfg: &SimConfig) -> Result<SimTrace, SimError> {
    simulate_observed(d, cfg, &mut |_| {})
}

/// [`simulate`] with a callback on every diagram evaluation, including the
/// intermediate stages of rk4.
pub fn simulate_observed(
    d: &BlockDiagram,
    cfg: &SimConfig,
    observer: &mut dyn FnMut(&Observation),
) -> Result<SimTrace, SimError> {
    cfg.validate(d.states.len())?;
    let names = d.state_names();
    let switched = d.graph.switched_junctions();
    let mut x = cfg.initial_state.clone().unwrap_or_else(|| vec![0.0; d.states.len()]);
    check_finite(&x, &names, 0.0)?;
    let mut mode = initial_mode(&d.graph);
    let mut trace = SimTrace {
        probe_labels: d.probe_labels(),
        probes: vec![Vec::new(); d.probes.len()],
        state_names: names.clone(),
        ..Default::default()
    };

    let pass = evaluate_pass(d, &x, 0.0, &mode)?;
    observer(&Observation {
        time: 0.0,
        state: &x,
        mode: &mode,
        pass: &pass,
    });
    record(&mut trace, d, 0.0, &x, &mode, &pass);

    for k in 0..cfg.steps() {
        let t = cfg.time_at(k);
        let t_next = cfg.time_at(k + 1);
        x = integrate_observed(d, &x, t, &mode, cfg.dt, cfg.integrator, observer)?;
        check_finite(&x, &names, t_next)?;

        let mut pass = evaluate_pass(d, &x, t_next, &mode)?;
        observer(&Observation {
            time: t_next,
            state: &x,
            mode: &mode,
            pass: &pass,
        });
        let env = PassValuation {
            diagram: d,
            outputs: &pass.outputs,
            time: t_next,
        };
        let (next, flips) = update_mode(d, &mode, &env).map_err(|source| SimError::Guard { time: t_next, source })?;
        if !flips.is_empty() {
            for (slot, transition) in flips {
                trace.events.push(ModeEvent {
                    time: t_next,
                    junction: d.graph.junctions[switched[slot]].name.clone(),
                    transition,
                });
            }
            mode = next;
            pass = evaluate_pass(d, &x, t_next, &mode)?;
            observer(&Observation {
                time: t_next,
                state: &x,
                mode: &mode,
                pass: &pass,
            });
        }
        if (k + 1) % cfg.record_every == 0 {
            record(&mut trace, d, t_next, &x, &mode, &pass);
        }
    }
    Ok(trace)
}

fn record(trace: &mut SimTrace, d: &BlockDiagram, t: f64, x: &[f64], mode: &Mode, pass: &Pass) {
    trace.times.push(t);
    for (series, v) in trace.probes.iter_mut().zip(pass.probe_values(d)) {
        series.push(v);
    }
    trace.states.push(x.to_vec());
    trace.modes.push(mode.clone());
}

/// Blowup check shared with the benchmark oracle.
pub fn check_finite(x: &[f64], names: &[String], time: f64) -> Result<(), SimError> {
    match x.iter().position(|v| !v.is_finite() || v.abs() > BLOWUP_LIMIT) {
        None => Ok(()),
        Some(i) => Err(SimError::NumericalBlowup {
            time,
            variable: names.get(i).cloned().unwrap_or_else(|| format!("x{i}")),
            value: x[i],
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_model;
    use crate::ibd::compile;

    fn decay(method: IntegratorKind) -> f64 {
        let mut f = |x: &[f64], _t: f64| -> Result<Vec<f64>, ()> { Ok(vec![-x[0]]) };
        ode_step(&mut f, &[1.0], 0.0, 0.01, method).unwrap()[0]
    }

    #[test]
    fn single_steps_of_decay() {
        assert_eq!(decay(IntegratorKind::Euler), 0.99);
        // 1 - h + h^2/2 - h^3/6 + h^4/24
        let h: f64 = 0.01;
        let taylor = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert!((decay(IntegratorKind::Rk4) - taylor).abs() < 1e-15);
        assert!((decay(IntegratorKind::Rk4) - 0.990049834).abs() < 1e-9);
    }

    const TANK: &str = "bondgraph tank {
  signal u = piecewise(0.0: 0.0, 1.0: 1.0)
  element Sf Sf1 { value = signal(u) }
  element C C1 { value = 1.0 }
  element R R1 { value = 1.0 }
  junction 0 j
  bond b1 from Sf1 to j
  bond b2 from j to C1
  bond b3 from j to R1
  probe h = effort(C1)
}
";

    #[test]
    fn one_tank_step_response() {
        let d = compile(&parse_model(&TANK.replace("0.0: 0.0, 1.0: 1.0", "0.0: 1.0")).unwrap()).unwrap();
        let trace = simulate(&d, &SimConfig::default()).unwrap();
        assert_eq!(trace.len(), 1001);
        let h = trace.probe("h").unwrap();
        for (t, v) in trace.times.iter().zip(h) {
            let exact = 1.0 - (-t).exp();
            assert!((v - exact).abs() < 1e-6, "t={t} h={v} exact={exact}");
        }
    }

    #[test]
    fn zero_dynamics_stay_put() {
        let d = compile(&parse_model(&TANK.replace("1.0: 1.0", "1.0: 0.0")).unwrap()).unwrap();
        for method in [IntegratorKind::Euler, IntegratorKind::Rk4] {
            let cfg = SimConfig {
                integrator: method,
                t_end: 1.0,
                ..Default::default()
            };
            let trace = simulate(&d, &cfg).unwrap();
            assert!(trace.probes[0].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn recording_stride_and_time_grid() {
        let d = compile(&parse_model(TANK).unwrap()).unwrap();
        let cfg = SimConfig {
            t_end: 1.0,
            record_every: 10,
            ..Default::default()
        };
        let trace = simulate(&d, &cfg).unwrap();
        assert_eq!(trace.len(), 11);
        assert_eq!(trace.times[10], 1.0);
        assert_eq!(trace.times[7], 0.7);
        assert!(trace.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn bad_configs_are_rejected() {
        let d = compile(&parse_model(TANK).unwrap()).unwrap();
        for cfg in [
            SimConfig {
                dt: 0.0,
                ..Default::default()
            },
            SimConfig {
                t_end: -1.0,
                ..Default::default()
            },
            SimConfig {
                record_every: 0,
                ..Default::default()
            },
            SimConfig {
                initial_state: Some(vec![0.0, 0.0]),
                ..Default::default()
            },
        ] {
            assert!(matches!(simulate(&d, &cfg), Err(SimError::Config(_))));
        }
    }

    #[test]
    fn runaway_state_is_reported() {
        let src = TANK.replace(
            "element Sf Sf1 { value = signal(u) }",
            "element MSf Sf1 { value = (effort(C1) * 10.0) }",
        );
        let d = compile(&parse_model(&src).unwrap()).unwrap();
        let cfg = SimConfig {
            initial_state: Some(vec![1.0]),
            t_end: 100.0,
            ..Default::default()
        };
        match simulate(&d, &cfg) {
            Err(SimError::NumericalBlowup { variable, .. }) => assert_eq!(variable, "C1"),
            other => panic!("expected blowup, got {other:?}"),
        }
    }

    #[test]
    fn periodic_time_guard_alternates() {
        let src = TANK.replace(
            "  probe h",
            "  junction 1 d switched { on_guard = ((time % 2.0) >= 1.0); off_guard = ((time % 2.0) < 1.0); init = off }
  element R R2 { value = 1.0 }
  bond b4 from j to d
  bond b5 from d to R2
  probe h",
        );
        let d = compile(&parse_model(&src).unwrap()).unwrap();
        let cfg = SimConfig {
            t_end: 6.0,
            ..Default::default()
        };
        let trace = simulate(&d, &cfg).unwrap();
        assert_eq!(trace.events.len(), 6);
        for (k, e) in trace.events.iter().enumerate() {
            assert!((e.time - (k + 1) as f64).abs() <= 0.01 + 1e-12);
            let expect = if k % 2 == 0 {
                Transition::OffToOn
            } else {
                Transition::OnToOff
            };
            assert_eq!(e.transition, expect);
        }
    }

    #[test]
    fn identical_runs_are_bitwise_equal() {
        let d = compile(&parse_model(TANK).unwrap()).unwrap();
        let a = simulate(&d, &SimConfig::default()).unwrap();
        let b = simulate(&d, &SimConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
