//! Python bindings. Records, reports and receipts cross the boundary as
//! plain dicts with the same fields as the JSON the CLI writes.

use std::sync::Mutex;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use vecorch::harness::{run_scenario as run_batch, ScenarioConfig, ScenarioId, Simulation as CoreSimulation};
use vecorch::orchestrators::parse_decision as core_parse_decision;
use vecorch::semantics::interpret_rules;
use vecorch::sim::Population;
use vecorch::{PolicyKind, PredictorKind};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Serializes through JSON so dicts match the files on disk.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Config from TOML text, or a preset when no text is given. Keyword
/// overrides apply on top of either.
#[allow(clippy::too_many_arguments)]
fn build_config(
    config: Option<&str>,
    preset: Option<&str>,
    policy: Option<&str>,
    vehicles: Option<usize>,
    predictor: Option<&str>,
    seeds: Option<Vec<u64>>,
    slots: Option<u64>,
) -> PyResult<ScenarioConfig> {
    let policy = policy.map(str::parse::<PolicyKind>).transpose().map_err(value_err)?;
    let mut cfg = match (config, preset) {
        (Some(_), Some(_)) => return Err(PyValueError::new_err("give either config or preset, not both")),
        (Some(text), None) => {
            let mut c = ScenarioConfig::from_toml_str(text).map_err(value_err)?;
            if let Some(p) = policy {
                c.policy = p;
                c.semantic = vecorch::harness::policy_is_semantic(p);
            }
            if let Some(n) = vehicles {
                c.population = Population::Fixed(n);
            }
            c
        }
        (None, preset) => {
            let id = preset.unwrap_or("custom").parse::<ScenarioId>().map_err(value_err)?;
            ScenarioConfig::preset(id, policy.unwrap_or(PolicyKind::Sp), vehicles)
        }
    };
    if let Some(p) = predictor {
        cfg.predictor = p.parse::<PredictorKind>().map_err(value_err)?;
    }
    if let Some(s) = seeds {
        cfg.seeds = s;
    }
    if let Some(t) = slots {
        cfg.total_slots = t;
        cfg.phases.retain(|ph| ph.to <= t);
    }
    cfg.validate().map_err(value_err)?;
    Ok(cfg)
}

/// Runs every seed and returns `(report, streams)`; `streams[i]` holds the
/// per-slot records of `report["per_seed"][i]`.
#[pyfunction]
#[pyo3(signature = (config=None, *, preset=None, policy=None, vehicles=None, predictor=None, seeds=None, slots=None))]
#[allow(clippy::too_many_arguments)]
fn run_scenario(
    py: Python<'_>,
    config: Option<&str>,
    preset: Option<&str>,
    policy: Option<&str>,
    vehicles: Option<usize>,
    predictor: Option<&str>,
    seeds: Option<Vec<u64>>,
    slots: Option<u64>,
) -> PyResult<(Py<PyAny>, Py<PyAny>)> {
    let cfg = build_config(config, preset, policy, vehicles, predictor, seeds, slots)?;
    let (report, runs) = py.detach(|| run_batch(&cfg)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let streams: Vec<_> = runs.iter().map(|r| &r.records).collect();
    Ok((to_py(py, &report)?, to_py(py, &streams)?))
}

/// Weights the rule interpreter assigns to a command.
#[pyfunction]
fn interpret_command(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    to_py(py, &interpret_rules(text))
}

/// Validates model output as a decision for `vehicle_ids` and `num_types`
/// task types. Raises `ValueError` if it cannot be used.
#[pyfunction]
#[pyo3(signature = (text, vehicle_ids, num_types, slot=0))]
fn parse_decision(py: Python<'_>, text: &str, vehicle_ids: Vec<u64>, num_types: usize, slot: u64) -> PyResult<Py<PyAny>> {
    let d = core_parse_decision(text, &vehicle_ids, num_types, slot).map_err(value_err)?;
    to_py(py, &d)
}

/// Default config for a preset as TOML text, a starting point for edits.
#[pyfunction]
#[pyo3(signature = (preset="custom", policy="sp", vehicles=None))]
fn default_config(preset: &str, policy: &str, vehicles: Option<usize>) -> PyResult<String> {
    let id = preset.parse::<ScenarioId>().map_err(value_err)?;
    let p = policy.parse::<PolicyKind>().map_err(value_err)?;
    ScenarioConfig::preset(id, p, vehicles).to_toml_string().map_err(value_err)
}

/// One seeded run, stepped from Python.
#[pyclass]
struct Simulation {
    inner: Mutex<CoreSimulation>,
}

impl Simulation {
    fn with<T>(&self, f: impl FnOnce(&mut CoreSimulation) -> T) -> T {
        f(&mut self.inner.lock().unwrap_or_else(|e| e.into_inner()))
    }
}

#[pymethods]
impl Simulation {
    #[new]
    #[pyo3(signature = (config=None, *, seed=0, preset=None, policy=None, vehicles=None, predictor=None, slots=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        py: Python<'_>,
        config: Option<&str>,
        seed: u64,
        preset: Option<&str>,
        policy: Option<&str>,
        vehicles: Option<usize>,
        predictor: Option<&str>,
        slots: Option<u64>,
    ) -> PyResult<Self> {
        let cfg = build_config(config, preset, policy, vehicles, predictor, None, slots)?;
        let sim = py.detach(|| CoreSimulation::new(cfg, seed)).map_err(value_err)?;
        Ok(Simulation { inner: Mutex::new(sim) })
    }

    /// Runs one slot and returns its record.
    fn step(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        if self.with(|s| s.is_finished()) {
            return Err(PyRuntimeError::new_err("simulation already finished"));
        }
        let rec = py.detach(|| self.with(|s| s.step())).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        to_py(py, &rec)
    }

    /// Steps to the end and returns the remaining records.
    fn run(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let recs = py
            .detach(|| {
                self.with(|s| {
                    let mut out = Vec::new();
                    while !s.is_finished() {
                        out.push(s.step()?);
                    }
                    Ok::<_, vecorch::Error>(out)
                })
            })
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        to_py(py, &recs)
    }

    /// Queues an operator command for the next slot boundary.
    fn issue_command(&self, py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
        let receipt = self.with(|s| s.issue_command(text));
        to_py(py, &receipt)
    }

    #[getter]
    fn beta(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let b = self.with(|s| s.beta().clone());
        to_py(py, &b)
    }

    #[getter]
    fn goal_text(&self) -> String {
        self.with(|s| s.goal_text().to_string())
    }

    #[getter]
    fn slot(&self) -> u64 {
        self.with(|s| s.recorded_slots())
    }

    #[getter]
    fn finished(&self) -> bool {
        self.with(|s| s.is_finished())
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.with(|s| s.seed())
    }

    fn __repr__(&self) -> String {
        self.with(|s| format!("Simulation(policy={}, seed={}, slot={}/{})", s.config().label(), s.seed(), s.recorded_slots(), s.config().total_slots))
    }
}

#[pymodule]
pub fn vecorch_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("ENERGY_SAVE_COMMAND", vecorch::harness::ENERGY_SAVE_COMMAND)?;
    m.add_class::<Simulation>()?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(interpret_command, m)?)?;
    m.add_function(wrap_pyfunction!(parse_decision, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    Ok(())
}
