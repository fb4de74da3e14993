//! Python module `pyhbg`: parse, compile and simulate hybrid bond graph models.

use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hbg_core::bench as tank;
use hbg_core::ibd::compile_with_cap;
use hbg_core::model::Mode;
use hbg_core::{BlockDiagram, BondGraph, IntegratorKind, SimConfig, SimTrace};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_error(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn sim_config(
    dt: f64,
    t_end: f64,
    integrator: &str,
    initial_state: Option<Vec<f64>>,
    record_every: usize,
) -> PyResult<SimConfig> {
    Ok(SimConfig {
        dt,
        t_end,
        integrator: integrator.parse::<IntegratorKind>().map_err(value_error)?,
        initial_state,
        record_every,
    })
}

fn parse_mode(bits: &str, len: usize) -> PyResult<Mode> {
    if bits.len() != len || !bits.chars().all(|c| c == '0' || c == '1') {
        return Err(PyValueError::new_err(format!(
            "mode must be a string of {len} '0'/'1' characters, got {bits:?}"
        )));
    }
    Ok(Mode(bits.chars().map(|c| c == '1').collect()))
}

/// A bond graph with its switched junctions and control automata.
#[pyclass(module = "pyhbg", eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
pub struct Model {
    inner: BondGraph,
}

#[pymethods]
impl Model {
    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn elements(&self) -> Vec<String> {
        self.inner.elements.iter().map(|e| e.name.clone()).collect()
    }

    #[getter]
    fn junctions(&self) -> Vec<String> {
        self.inner.junctions.iter().map(|j| j.name.clone()).collect()
    }

    #[getter]
    fn bonds(&self) -> Vec<(String, String, String)> {
        self.inner
            .bonds
            .iter()
            .map(|b| (b.name.clone(), b.from.clone(), b.to.clone()))
            .collect()
    }

    #[getter]
    fn switched_junctions(&self) -> Vec<String> {
        self.inner
            .switched_junctions()
            .into_iter()
            .map(|j| self.inner.junctions[j].name.clone())
            .collect()
    }

    #[getter]
    fn probes(&self) -> Vec<String> {
        self.inner.probes.iter().map(|p| p.label.clone()).collect()
    }

    /// Text form that `parse_model` reads back to an equal model.
    fn serialize(&self) -> String {
        hbg_core::serialize_model(&self.inner)
    }

    /// Structural problems, one message each; empty when the model is valid.
    fn validate(&self) -> Vec<String> {
        hbg_core::validate_graph(&self.inner)
            .iter()
            .map(ToString::to_string)
            .collect()
    }

    #[pyo3(signature = (mode_cap = hbg_core::ibd::DEFAULT_MODE_CAP))]
    fn compile(&self, mode_cap: u64) -> PyResult<Diagram> {
        let inner = compile_with_cap(&self.inner, mode_cap).map_err(value_error)?;
        Ok(Diagram { inner })
    }

    /// Causality in every mode, as a dict with `modes`, `integral`,
    /// `orientation` and `failures` (mode string to error message).
    #[pyo3(signature = (mode_cap = hbg_core::ibd::DEFAULT_MODE_CAP))]
    fn check_all_modes<'py>(&self, py: Python<'py>, mode_cap: u64) -> PyResult<Bound<'py, PyDict>> {
        let report = hbg_core::check_all_modes(&self.inner, mode_cap).map_err(value_error)?;
        let failures = PyDict::new(py);
        for o in report.failures() {
            let message = match &o.result {
                Err(e) => e.to_string(),
                Ok(()) => "causal orientation differs from the all-on mode".into(),
            };
            failures.set_item(o.mode.to_string(), message)?;
        }
        let d = PyDict::new(py);
        d.set_item("modes", report.outcomes.len())?;
        d.set_item("integral", report.mode_invariant_integral)?;
        d.set_item("orientation", report.orientation_invariant)?;
        d.set_item("failures", failures)?;
        Ok(d)
    }

    /// Bond graph as GraphViz DOT with causal strokes when causality holds.
    fn to_dot(&self) -> String {
        let all_on = Mode(vec![true; self.inner.switched_junctions().len()]);
        let causality = hbg_core::assign_causality(&self.inner, &all_on).ok();
        hbg_core::ibd::emit_graph_dot(&self.inner, causality.as_ref())
    }

    fn __repr__(&self) -> String {
        format!(
            "Model({:?}, {} elements, {} junctions, {} bonds)",
            self.inner.name,
            self.inner.elements.len(),
            self.inner.junctions.len(),
            self.inner.bonds.len()
        )
    }
}

/// A compiled block diagram ready to simulate.
#[pyclass(module = "pyhbg", skip_from_py_object)]
#[derive(Clone)]
pub struct Diagram {
    inner: BlockDiagram,
}

#[pymethods]
impl Diagram {
    #[getter]
    fn state_names(&self) -> Vec<String> {
        self.inner.state_names()
    }

    #[getter]
    fn probe_labels(&self) -> Vec<String> {
        self.inner.probe_labels()
    }

    #[getter]
    fn mode_len(&self) -> usize {
        self.inner.mode_len()
    }

    /// Number of blocks, or of blocks of one type such as `"Integrator"`.
    #[pyo3(signature = (kind = None))]
    fn block_count(&self, kind: Option<&str>) -> usize {
        match kind {
            Some(k) => self.inner.count(k),
            None => self.inner.blocks.len(),
        }
    }

    fn to_dot(&self) -> String {
        hbg_core::emit_dot(&self.inner)
    }

    /// Probe values for one evaluation at `state`, `t` and `mode` (a bit string).
    fn evaluate<'py>(&self, py: Python<'py>, state: Vec<f64>, t: f64, mode: &str) -> PyResult<Bound<'py, PyDict>> {
        let mode = parse_mode(mode, self.inner.mode_len())?;
        let pass = hbg_core::evaluate_pass(&self.inner, &state, t, &mode).map_err(value_error)?;
        let d = PyDict::new(py);
        for (label, v) in self
            .inner
            .probe_labels()
            .into_iter()
            .zip(pass.probe_values(&self.inner))
        {
            d.set_item(label, v)?;
        }
        Ok(d)
    }

    #[pyo3(signature = (dt = 0.01, t_end = 10.0, integrator = "rk4", initial_state = None, record_every = 1))]
    fn simulate(
        &self,
        py: Python<'_>,
        dt: f64,
        t_end: f64,
        integrator: &str,
        initial_state: Option<Vec<f64>>,
        record_every: usize,
    ) -> PyResult<Trace> {
        let cfg = sim_config(dt, t_end, integrator, initial_state, record_every)?;
        let inner = py
            .detach(|| hbg_core::simulate(&self.inner, &cfg))
            .map_err(runtime_error)?;
        Ok(Trace { inner })
    }
}

/// Recorded times, probes, states, modes and mode-change events of a run.
#[pyclass(module = "pyhbg", skip_from_py_object)]
#[derive(Clone)]
pub struct Trace {
    inner: SimTrace,
}

#[pymethods]
impl Trace {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn probe_labels(&self) -> Vec<String> {
        self.inner.probe_labels.clone()
    }

    #[getter]
    fn state_names(&self) -> Vec<String> {
        self.inner.state_names.clone()
    }

    #[getter]
    fn states(&self) -> Vec<Vec<f64>> {
        self.inner.states.clone()
    }

    #[getter]
    fn modes(&self) -> Vec<String> {
        self.inner.modes.iter().map(ToString::to_string).collect()
    }

    /// `(time, junction, "off->on" | "on->off")` per mode change.
    #[getter]
    fn events(&self) -> Vec<(f64, String, String)> {
        self.inner
            .events
            .iter()
            .map(|e| (e.time, e.junction.clone(), e.transition.to_string()))
            .collect()
    }

    fn probe(&self, label: &str) -> PyResult<Vec<f64>> {
        self.inner
            .probe(label)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| PyKeyError::new_err(label.to_string()))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Trace({} rows, probes {:?})", self.inner.len(), self.inner.probe_labels)
    }
}

/// Physical parameters of the three-tank system.
#[pyclass(module = "pyhbg", get_all, set_all, skip_from_py_object)]
#[derive(Clone)]
pub struct TankParams {
    c1: f64,
    c2: f64,
    c3: f64,
    r1: f64,
    r12: f64,
    r23: f64,
    r2: f64,
    h12: f64,
    h23: f64,
    qp1: f64,
    qp2: f64,
    t10: f64,
    t20: f64,
}

impl From<&TankParams> for tank::TankParams {
    fn from(p: &TankParams) -> Self {
        tank::TankParams {
            c1: p.c1,
            c2: p.c2,
            c3: p.c3,
            r1: p.r1,
            r12: p.r12,
            r23: p.r23,
            r2: p.r2,
            h12: p.h12,
            h23: p.h23,
            qp1: p.qp1,
            qp2: p.qp2,
            t10: p.t10,
            t20: p.t20,
        }
    }
}

#[pymethods]
impl TankParams {
    #[new]
    #[pyo3(signature = (
        c1 = 1.0, c2 = 1.0, c3 = 1.0, r1 = 1.0, r12 = 1.0, r23 = 1.0, r2 = 1.0,
        h12 = 0.5, h23 = 0.7, qp1 = 1.0, qp2 = 0.5, t10 = 1.0, t20 = 3.0
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        c1: f64,
        c2: f64,
        c3: f64,
        r1: f64,
        r12: f64,
        r23: f64,
        r2: f64,
        h12: f64,
        h23: f64,
        qp1: f64,
        qp2: f64,
        t10: f64,
        t20: f64,
    ) -> PyResult<Self> {
        let p = TankParams {
            c1,
            c2,
            c3,
            r1,
            r12,
            r23,
            r2,
            h12,
            h23,
            qp1,
            qp2,
            t10,
            t20,
        };
        tank::TankParams::from(&p).validate().map_err(value_error)?;
        Ok(p)
    }
}

fn params(p: Option<PyRef<'_, TankParams>>) -> PyResult<tank::TankParams> {
    let p = p.map_or_else(tank::TankParams::default, |p| tank::TankParams::from(&*p));
    p.validate().map_err(value_error)?;
    Ok(p)
}

/// Parses model text; raises `ValueError` listing every error with its location.
#[pyfunction]
fn parse_model(text: &str) -> PyResult<Model> {
    hbg_core::parse_model(text)
        .map(|inner| Model { inner })
        .map_err(|errors| {
            let lines: Vec<String> = errors.iter().map(ToString::to_string).collect();
            PyValueError::new_err(lines.join("\n"))
        })
}

#[pyfunction]
#[pyo3(signature = (params = None))]
fn three_tank(params: Option<PyRef<'_, TankParams>>) -> PyResult<Model> {
    Ok(Model {
        inner: tank::build_three_tank(&self::params(params)?),
    })
}

/// Direct piecewise-linear simulation of the three tanks, for comparison.
#[pyfunction]
#[pyo3(signature = (params = None, dt = 0.01, t_end = 10.0, integrator = "rk4"))]
fn oracle_simulate(params: Option<PyRef<'_, TankParams>>, dt: f64, t_end: f64, integrator: &str) -> PyResult<Trace> {
    let cfg = sim_config(dt, t_end, integrator, None, 1)?;
    let (inner, _) = tank::oracle_simulate(&self::params(params)?, &cfg).map_err(runtime_error)?;
    Ok(Trace { inner })
}

#[pyfunction]
#[pyo3(signature = (params = None))]
fn steady_state(params: Option<PyRef<'_, TankParams>>) -> PyResult<(f64, f64, f64)> {
    let [a, b, c] = tank::steady_state(&self::params(params)?).map_err(value_error)?;
    Ok((a, b, c))
}

/// Flow through a pipe at `height` between two tanks, positive left to right.
#[pyfunction]
fn pipe_flow(h_left: f64, h_right: f64, height: f64, r: f64) -> PyResult<f64> {
    if r.is_nan() || r <= 0.0 {
        return Err(PyValueError::new_err(format!("resistance must be positive, got {r}")));
    }
    Ok(tank::pipe_flow(h_left, h_right, height, r))
}

/// First time `probe` reaches `level`, interpolated between samples.
#[pyfunction]
fn crossing_time(trace: PyRef<'_, Trace>, probe: &str, level: f64) -> PyResult<Option<f64>> {
    tank::crossing_time(&trace.inner, probe, level).map_err(|e| PyKeyError::new_err(e.to_string()))
}

/// Adds every class and function to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<Diagram>()?;
    m.add_class::<Trace>()?;
    m.add_class::<TankParams>()?;
    m.add_function(wrap_pyfunction!(parse_model, m)?)?;
    m.add_function(wrap_pyfunction!(three_tank, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_simulate, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(pipe_flow, m)?)?;
    m.add_function(wrap_pyfunction!(crossing_time, m)?)?;
    Ok(())
}

#[pymodule]
fn pyhbg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
