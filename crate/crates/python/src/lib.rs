//! Python module `mlpf`: benchmark problems, cost kernels and experiment runs.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList};

use mlpf_core::benchmarks::{problem_by_name, BenchmarkProblem, ProblemName};
use mlpf_core::harness::acceptance::run_criterion;
use mlpf_core::harness::config::{parse_entries, resolve, Entry};
use mlpf_core::harness::experiment::run_experiment;
use mlpf_core::harness::trace_io::{to_csv, to_json};
use mlpf_core::mlpf::{CostConfig, CostKernel, KernelKind, OptimizationTrace};
use mlpf_core::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::NonFinite { .. }
        | Error::NonFiniteValue { .. }
        | Error::KdlDomain { .. }
        | Error::PairTooClose { .. }
        | Error::RelaxationFailed { .. }
        | Error::GlobalBasin { .. } => PyArithmeticError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse()
        .map_err(|e: T::Err| PyValueError::new_err(e.to_string()))
}

/// A benchmark objective: `ctl`, `dvg02` or `lj13`.
#[pyclass(name = "Problem", module = "mlpf", frozen)]
struct PyProblem {
    inner: BenchmarkProblem,
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (name, lj_seed = 0))]
    fn new(name: &str, lj_seed: u64) -> PyResult<Self> {
        let name: ProblemName = parse(name)?;
        problem_by_name(name, lj_seed)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name.as_str()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn global_minimum_value(&self) -> f64 {
        self.inner.global_minimum_value
    }

    #[getter]
    fn canonical_initials(&self) -> Vec<Vec<f64>> {
        self.inner.canonical_initials.clone()
    }

    fn eval(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.eval(&x).map_err(to_py)
    }

    /// Returns `(value, gradient)`.
    fn gradient(&self, x: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
        self.inner.graph.gradient(&x).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Problem('{}', dim={})", self.inner.name, self.inner.dim())
    }
}

/// Result of one run.
#[pyclass(name = "Trace", module = "mlpf", frozen)]
struct PyTrace {
    inner: OptimizationTrace,
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn status(&self) -> String {
        self.inner.status.to_string()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps
    }

    #[getter]
    fn final_point(&self) -> Vec<f64> {
        self.inner.final_point.clone()
    }

    #[getter]
    fn message(&self) -> Option<String> {
        self.inner.message.clone()
    }

    #[getter]
    fn header(&self) -> Vec<(String, String)> {
        self.inner.header.clone()
    }

    /// Recorded rows as `(iteration, rho_n, rho_cost, objective, targets)`.
    #[getter]
    fn rows(&self) -> Vec<(usize, f64, f64, f64, Vec<f64>)> {
        self.inner
            .rows
            .iter()
            .map(|r| {
                (
                    r.iteration,
                    r.rho_n,
                    r.rho_cost,
                    r.objective,
                    r.targets.clone(),
                )
            })
            .collect()
    }

    fn to_csv(&self) -> PyResult<String> {
        let bytes = to_csv(&self.inner).map_err(to_py)?;
        String::from_utf8(bytes).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> PyResult<String> {
        let bytes = to_json(&self.inner).map_err(to_py)?;
        String::from_utf8(bytes).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Trace(status='{}', steps={})",
            self.inner.status, self.inner.steps
        )
    }
}

/// `u(rho)` for the `square` or `sigmoid` kernel.
#[pyfunction]
fn kernel(kind: &str, rho: f64) -> PyResult<f64> {
    Ok(CostKernel::new(parse::<KernelKind>(kind)?).apply(rho))
}

#[pyfunction]
fn apply_kdl(rho_n: f64, rho_0: f64, offset: f64) -> PyResult<f64> {
    mlpf_core::mlpf::apply_kdl(rho_n, rho_0, offset).map_err(to_py)
}

/// Cost update `u(rho_cost)`; KDL is used when `kdl_offset` is given.
#[pyfunction]
#[pyo3(signature = (rho_n, target, kind = "square", kdl_offset = None))]
fn cost_update(rho_n: f64, target: f64, kind: &str, kdl_offset: Option<f64>) -> PyResult<f64> {
    let mut cost = CostConfig::new(parse(kind)?, target);
    if let Some(off) = kdl_offset {
        cost = cost.with_kdl(off);
    }
    mlpf_core::mlpf::cost_update(rho_n, &cost).map_err(to_py)
}

/// Config value text for a Python object; bools use the config spelling.
fn value_text(v: &Bound<'_, PyAny>) -> PyResult<String> {
    if v.is_instance_of::<PyBool>() {
        return Ok(if v.extract::<bool>()? {
            "true"
        } else {
            "false"
        }
        .to_string());
    }
    if let Ok(items) = v.cast::<PyList>() {
        let parts = items
            .iter()
            .map(|i| value_text(&i))
            .collect::<PyResult<Vec<_>>>()?;
        return Ok(parts.join(", "));
    }
    Ok(v.str()?.to_string())
}

/// Runs one experiment from config text; keyword arguments override keys.
#[pyfunction]
#[pyo3(signature = (config = "", **overrides))]
fn run(config: &str, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<PyTrace> {
    let mut entries = parse_entries(config).map_err(to_py)?;
    let mut extra = Vec::new();
    if let Some(d) = overrides {
        for (k, v) in d.iter() {
            extra.push((k.extract::<String>()?, value_text(&v)?));
        }
    }
    for (key, value) in extra {
        entries.retain(|e| e.key != key);
        entries.push(Entry {
            key,
            value,
            line: 0,
        });
    }
    let cfg = resolve(&entries).map_err(to_py)?;
    run_experiment(&cfg)
        .map(|inner| PyTrace { inner })
        .map_err(to_py)
}

/// Runs one acceptance criterion; returns `(passed, detail)`.
#[pyfunction]
fn check(name: &str) -> PyResult<(bool, String)> {
    run_criterion(name)
        .map(|c| (c.passed, c.detail))
        .ok_or_else(|| PyValueError::new_err(format!("unknown criterion `{name}`")))
}

#[pymodule]
fn mlpf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(apply_kdl, m)?)?;
    m.add_function(wrap_pyfunction!(cost_update, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    Ok(())
}
