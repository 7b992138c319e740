//! Python bindings for the engine. Structured results are returned as
//! plain Python dicts and lists.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use typicell::harness::{self, adaptive_cell, direction_stream_index, ExperimentConfig as CoreConfig, Format};
use typicell::sampler::{sample_ball, PointSet as CorePointSet, RngStream};
use typicell::{Error, TypicalCell as CoreCell};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Parse(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Serializes `value` and hands it to `json.loads`.
fn to_object<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A Poisson configuration restricted to a ball.
#[pyclass(name = "PointSet", module = "typicell")]
struct PointSet {
    inner: CorePointSet,
}

#[pymethods]
impl PointSet {
    /// Samples the configuration in `B(0, radius)` for `(seed, stream)`.
    #[staticmethod]
    #[pyo3(signature = (d, radius, seed, stream = 0))]
    fn sample(d: usize, radius: f64, seed: u64, stream: u64) -> PyResult<Self> {
        let inner = sample_ball(d, radius, &mut RngStream::new(seed, stream)).map_err(to_py)?;
        Ok(PointSet { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PointSet { inner: CorePointSet::from_json(text).map_err(to_py)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.inner.truncation_radius
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.points.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("PointSet(d={}, R={}, n={})", self.inner.d, self.inner.truncation_radius, self.inner.len())
    }
}

/// Sweep and replication parameters.
#[pyclass(name = "ExperimentConfig", module = "typicell")]
struct ExperimentConfig {
    inner: CoreConfig,
}

#[pymethods]
impl ExperimentConfig {
    /// Keyword arguments use the configuration-file keys, e.g.
    /// `ExperimentConfig(d="2-4", reps=10, eps="0.1,0.2")`.
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<Self> {
        let mut inner = CoreConfig::default();
        if let Some(kw) = kwargs {
            for (k, v) in kw.iter() {
                let key: String = k.extract()?;
                inner.set(&key, &v.str()?.to_string()).map_err(to_py)?;
            }
        }
        inner.validate().map_err(to_py)?;
        Ok(ExperimentConfig { inner })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(ExperimentConfig { inner: CoreConfig::from_text(text).map_err(to_py)? })
    }

    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner.set(key, value).map_err(to_py)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("ExperimentConfig(d={:?}, reps={})", self.inner.d_list, self.inner.replications)
    }
}

/// A typical cell, exact for its configuration.
#[pyclass(name = "TypicalCell", module = "typicell")]
struct TypicalCell {
    inner: CoreCell,
    points: CorePointSet,
    direction_seed: (u64, u64),
}

#[pymethods]
impl TypicalCell {
    /// Cell of a fixed configuration (certified only if the ball was large enough).
    #[staticmethod]
    fn build(points: &PointSet) -> PyResult<Self> {
        let inner = typicell::build_typical_cell(&points.inner).map_err(to_py)?;
        let direction_seed = (points.inner.seed, points.inner.stream_index | 1);
        Ok(TypicalCell { inner, points: points.inner.clone(), direction_seed })
    }

    /// Certified cell of replication `rep` in dimension `d`, grown adaptively.
    #[staticmethod]
    #[pyo3(signature = (d, rep = 0, config = None))]
    fn replication(d: usize, rep: usize, config: Option<&ExperimentConfig>) -> PyResult<Self> {
        let c = config.map(|c| c.inner.clone()).unwrap_or_default();
        let (inner, points, _) = adaptive_cell(&c, d, rep).map_err(to_py)?;
        Ok(TypicalCell { inner, points, direction_seed: (c.master_seed, direction_stream_index(d, rep)) })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    #[getter]
    fn vertices(&self) -> Vec<Vec<f64>> {
        self.inner.vertices.clone()
    }

    /// Generators `z` of the facets.
    #[getter]
    fn facets(&self) -> Vec<Vec<f64>> {
        self.inner.facet_generators()
    }

    #[getter]
    fn outradius(&self) -> f64 {
        self.inner.outradius
    }

    #[getter]
    fn certified(&self) -> bool {
        self.inner.truncation_certified
    }

    fn support(&self, u: Vec<f64>) -> PyResult<f64> {
        if u.len() != self.inner.d {
            return Err(PyValueError::new_err("direction has the wrong dimension"));
        }
        Ok(self.inner.support(&u))
    }

    /// Functionals with Monte Carlo mean width over `n_directions`.
    #[pyo3(signature = (n_directions = 4096))]
    fn measure<'py>(&self, py: Python<'py>, n_directions: usize) -> PyResult<Bound<'py, PyAny>> {
        let mut dirs = RngStream::new(self.direction_seed.0, self.direction_seed.1);
        let report = typicell::measure(&self.inner, n_directions, &mut dirs).map_err(to_py)?;
        to_object(py, &report)
    }

    /// Per-codimension face statistics for `k = 1..=k_max`.
    #[pyo3(signature = (k_max = 3, eps = vec![0.1, 0.2, 0.4], r_grid = vec![0.8, 0.9, 1.0]))]
    fn census<'py>(&self, py: Python<'py>, k_max: usize, eps: Vec<f64>, r_grid: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        let c = typicell::face_census(&self.inner, &self.points, k_max.min(self.inner.d), &eps, &r_grid).map_err(to_py)?;
        to_object(py, &c.summaries)
    }

    fn dump_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.to_dump()).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "TypicalCell(d={}, vertices={}, facets={}, certified={})",
            self.inner.d,
            self.inner.vertices.len(),
            self.inner.facet_records.len(),
            self.inner.truncation_certified
        )
    }
}

/// Aggregated table and per-replication reports of a sweep.
#[pyclass(name = "SweepResult", module = "typicell")]
struct SweepResult {
    outcome: harness::SweepOutcome,
    config: CoreConfig,
}

#[pymethods]
impl SweepResult {
    fn table_csv(&self) -> PyResult<String> {
        harness::table_csv(&self.outcome.table).map_err(to_py)
    }

    fn table_json(&self) -> PyResult<String> {
        harness::table_json(&self.outcome.table).map_err(to_py)
    }

    fn rows<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &self.outcome.table.rows)
    }

    fn reports<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &self.outcome.reports)
    }

    fn all_passed(&self) -> bool {
        self.outcome.all_passed()
    }

    /// Writes the result files into `out_dir` and returns their paths.
    #[pyo3(signature = (out_dir, format = "csv"))]
    fn write(&self, out_dir: PathBuf, format: &str) -> PyResult<Vec<PathBuf>> {
        let f = match format {
            "csv" => Format::Csv,
            "json" => Format::Json,
            other => return Err(PyValueError::new_err(format!("unknown format {other:?}"))),
        };
        harness::report(&self.outcome, &self.config, &out_dir, f).map_err(to_py)
    }
}

/// Runs every replication of `config`, releasing the GIL meanwhile.
#[pyfunction]
fn sweep(py: Python<'_>, config: &ExperimentConfig) -> PyResult<SweepResult> {
    let c = config.inner.clone();
    let outcome = py.detach(|| harness::sweep(&c)).map_err(to_py)?;
    Ok(SweepResult { outcome, config: c })
}

/// Full report of one replication.
#[pyfunction]
#[pyo3(signature = (d, rep, config = None))]
fn run_replication<'py>(py: Python<'py>, d: usize, rep: usize, config: Option<&ExperimentConfig>) -> PyResult<Bound<'py, PyAny>> {
    let c = config.map(|c| c.inner.clone()).unwrap_or_default();
    let report = py.detach(|| harness::run_replication(&c, d, rep));
    to_object(py, &report)
}

/// Circumball of the origin and `points`, as `(center, radius)`.
#[pyfunction]
fn circumball(points: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, f64)> {
    let b = typicell::circumball(&points).map_err(to_py)?;
    Ok((b.center, b.radius))
}

/// Parses a results table (CSV or JSON) and returns its rows.
#[pyfunction]
fn read_table<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    let table = if text.starts_with("#schema=") {
        harness::parse_table_csv(text)
    } else {
        harness::parse_table_json(text)
    }
    .map_err(to_py)?;
    to_object(py, &table.rows)
}

#[pymodule(name = "typicell")]
fn typicell_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SCHEMA", harness::SCHEMA)?;
    m.add_class::<PointSet>()?;
    m.add_class::<ExperimentConfig>()?;
    m.add_class::<TypicalCell>()?;
    m.add_class::<SweepResult>()?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_replication, m)?)?;
    m.add_function(wrap_pyfunction!(circumball, m)?)?;
    m.add_function(wrap_pyfunction!(read_table, m)?)?;
    Ok(())
}
