use thiserror::Error;

use super::{BlockDiagram, BlockKind};
use crate::expr::{GuardExpr, Valuation};
use crate::model::{JunctionKind, Mode, NodeRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("state has {got} entries, diagram has {expected} integrators")]
    StateLength { expected: usize, got: usize },
    #[error("mode has {got} entries, diagram has {expected} switched junctions")]
    ModeLength { expected: usize, got: usize },
}

/// Block outputs and state derivatives from one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Pass {
    pub outputs: Vec<f64>,
    pub derivatives: Vec<f64>,
}

impl Pass {
    pub fn probe_values(&self, d: &BlockDiagram) -> Vec<f64> {
        d.probes.iter().map(|&i| self.outputs[i]).collect()
    }
}

/// Evaluates every block once in schedule order.
pub fn evaluate_pass(d: &BlockDiagram, state: &[f64], t: f64, mode: &Mode) -> Result<Pass, EvalError> {
    if state.len() != d.states.len() {
        return Err(EvalError::StateLength {
            expected: d.states.len(),
            got: state.len(),
        });
    }
    if mode.len() != d.mode_len() {
        return Err(EvalError::ModeLength {
            expected: d.mode_len(),
            got: mode.len(),
        });
    }
    let mut out = vec![0.0; d.blocks.len()];
    for (&i, &x) in d.states.iter().zip(state) {
        out[i] = x;
    }
    for &i in &d.schedule {
        let b = &d.blocks[i];
        let arg = |k: usize| out[b.inputs[k]];
        out[i] = match &b.kind {
            BlockKind::Integrator { .. } => unreachable!("integrators are not scheduled"),
            BlockKind::Gain { k } => k * arg(0),
            BlockKind::Sum { signs } => signs.iter().zip(&b.inputs).map(|(s, &x)| s * out[x]).sum(),
            BlockKind::Constant { value } => *value,
            BlockKind::SignalSource { signal } => d.graph.signal(signal).map_or(0.0, |s| s.value_at(t)),
            BlockKind::Clock => t,
            BlockKind::Arith { op } => op.apply(arg(0), arg(1)),
            BlockKind::Switch { slot, .. } => {
                if mode.bit(*slot) {
                    arg(0)
                } else {
                    0.0
                }
            }
            BlockKind::Probe { .. } => arg(0),
        };
    }
    let derivatives = d
        .states
        .iter()
        .map(|&i| match &d.blocks[i].kind {
            BlockKind::Integrator { gain, .. } => gain * out[d.blocks[i].inputs[0]],
            _ => unreachable!(),
        })
        .collect();
    Ok(Pass {
        outputs: out,
        derivatives,
    })
}

/// Guard environment over the outputs of one pass.
pub struct PassValuation<'a> {
    pub diagram: &'a BlockDiagram,
    pub outputs: &'a [f64],
    pub time: f64,
}

impl Valuation for PassValuation<'_> {
    fn effort(&self, name: &str) -> Option<f64> {
        self.diagram.effort_block(name).map(|i| self.outputs[i])
    }
    fn flow(&self, name: &str) -> Option<f64> {
        self.diagram.flow_block(name).map(|i| self.outputs[i])
    }
    fn signal(&self, name: &str) -> Option<f64> {
        self.diagram.graph.signal(name).map(|s| s.value_at(self.time))
    }
    fn time(&self) -> f64 {
        self.time
    }
    fn decision(&self, name: &str) -> Option<&GuardExpr> {
        self.diagram.graph.decision(name).map(|d| &d.guard)
    }
}

/// Largest violations of a junction's two constraints in one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionResidual {
    pub junction: String,
    /// Signed effort sum (1-junction) or effort spread (0-junction).
    pub effort: f64,
    /// Signed flow sum (0-junction) or flow spread (1-junction).
    pub flow: f64,
}

impl JunctionResidual {
    pub fn max(&self) -> f64 {
        self.effort.abs().max(self.flow.abs())
    }
}

/// Residuals of every junction that is on in `mode`, over its active bonds.
pub fn junction_residuals(d: &BlockDiagram, pass: &Pass, mode: &Mode) -> Vec<JunctionResidual> {
    let g = &d.graph;
    let on = |j: usize| g.switch_slot(j).is_none_or(|s| mode.bit(s));
    let active = |b: usize| {
        [&g.bonds[b].from, &g.bonds[b].to]
            .into_iter()
            .all(|n| g.junction(n).is_none_or(on))
    };
    let mut residuals = Vec::new();
    for (j, junction) in g.junctions.iter().enumerate() {
        if !on(j) {
            continue;
        }
        let node = NodeRef::Junction(j);
        let bonds: Vec<usize> = g.incident_bonds(node).into_iter().filter(|&b| active(b)).collect();
        let sign = |b: usize| if g.bonds[b].to == junction.name { 1.0 } else { -1.0 };
        let signed = |vals: &[usize]| -> f64 { bonds.iter().map(|&b| sign(b) * pass.outputs[vals[b]]).sum() };
        let spread = |vals: &[usize]| -> f64 {
            let v: Vec<f64> = bonds.iter().map(|&b| pass.outputs[vals[b]]).collect();
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            if v.is_empty() {
                0.0
            } else {
                hi - lo
            }
        };
        let (effort, flow) = match junction.kind {
            JunctionKind::Zero => (spread(&d.bond_effort), signed(&d.bond_flow)),
            JunctionKind::One => (signed(&d.bond_effort), spread(&d.bond_flow)),
        };
        residuals.push(JunctionResidual {
            junction: junction.name.clone(),
            effort,
            flow,
        });
    }
    residuals
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_model;
    use crate::ibd::compile;

    const TANK: &str = "bondgraph tank {
  signal u = piecewise(0.0: 1.0)
  element Sf Sf1 { value = signal(u) }
  element C C1 { value = 2.0 }
  element R R1 { value = 0.5 }
  junction 0 j
  junction 1 k switched { on_guard = true; off_guard = false; init = off }
  element R R2 { value = 1.0 }
  bond b1 from Sf1 to j
  bond b2 from j to C1
  bond b3 from j to R1
  bond b4 from j to k
  bond b5 from k to R2
  probe h = effort(C1)
}
";

    #[test]
    fn tank_derivative_in_both_modes() {
        let d = compile(&parse_model(TANK).unwrap()).unwrap();
        // h' = (u - h/R1 - [k] h/R2) / C
        let off = evaluate_pass(&d, &[1.0], 0.0, &Mode(vec![false])).unwrap();
        assert!((off.derivatives[0] - (1.0 - 2.0) / 2.0).abs() < 1e-15);
        let on = evaluate_pass(&d, &[1.0], 0.0, &Mode(vec![true])).unwrap();
        assert!((on.derivatives[0] - (1.0 - 2.0 - 1.0) / 2.0).abs() < 1e-15);
        assert_eq!(on.probe_values(&d), vec![1.0]);
        assert_eq!(off.outputs[d.bond_flow[4]], 0.0);
        for m in [Mode(vec![false]), Mode(vec![true])] {
            let p = evaluate_pass(&d, &[0.3], 0.0, &m).unwrap();
            for r in junction_residuals(&d, &p, &m) {
                assert!(r.max() < 1e-12, "{r:?}");
            }
        }
    }

    #[test]
    fn lengths_are_checked() {
        let d = compile(&parse_model(TANK).unwrap()).unwrap();
        assert_eq!(
            evaluate_pass(&d, &[], 0.0, &Mode(vec![true])),
            Err(EvalError::StateLength { expected: 1, got: 0 })
        );
        assert!(evaluate_pass(&d, &[0.0], 0.0, &Mode(vec![])).is_err());
    }

    #[test]
    fn guards_read_pass_values() {
        let d = compile(&parse_model(TANK).unwrap()).unwrap();
        let p = evaluate_pass(&d, &[0.75], 0.5, &Mode(vec![true])).unwrap();
        let env = PassValuation {
            diagram: &d,
            outputs: &p.outputs,
            time: 0.5,
        };
        assert_eq!(env.effort("C1"), Some(0.75));
        assert_eq!(env.effort("j"), Some(0.75));
        assert_eq!(env.flow("R1"), Some(1.5));
        assert_eq!(env.flow("k"), Some(0.75));
        assert_eq!(env.signal("u"), Some(1.0));
        assert_eq!(env.effort("k"), None);
    }
}
