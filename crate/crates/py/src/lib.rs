//! Python bindings. Estimators take `replicas`, `seed` and `workers`
//! keywords and return plain dicts.

use operc::block::{self, BlockSpec};
use operc::estimators;
use operc::oracle;
use operc::verify::{self, Check};
use operc::{Environment, ExtInt, McConfig, StarterSpec};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: operc::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

fn ext(py: Python<'_>, e: ExtInt) -> PyResult<Py<PyAny>> {
    Ok(match e.as_finite() {
        Some(v) => v.into_pyobject(py)?.into_any().unbind(),
        None => e.to_f64().into_pyobject(py)?.into_any().unbind(),
    })
}

fn mc(replicas: usize, seed: u64, workers: Option<usize>) -> McConfig {
    McConfig { replicas, seed, workers }
}

/// Site-addressable uniforms; estimators use `EnvField.replica(seed, r)`.
#[pyclass(name = "EnvField", frozen)]
struct PyEnvField(operc::EnvField);

#[pymethods]
impl PyEnvField {
    #[new]
    fn new(seed: u64) -> Self {
        PyEnvField(operc::EnvField::new(seed))
    }

    #[staticmethod]
    fn replica(master: u64, r: u64) -> Self {
        PyEnvField(operc::EnvField::replica(master, r))
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed()
    }

    fn uniform(&self, n: i64, m: i64) -> f64 {
        self.0.uniform(n, m)
    }

    fn is_open(&self, n: i64, m: i64, p: f64) -> bool {
        self.0.is_open(n, m, p)
    }

    fn __repr__(&self) -> String {
        format!("EnvField(seed={})", self.0.seed())
    }
}

/// Block parallelogram parameters. `alpha` and `delta` are decimal or
/// `a/b` strings, or floats.
#[pyclass(name = "BlockSpec", frozen)]
struct PyBlockSpec(BlockSpec);

fn rational_arg(x: &Bound<'_, PyAny>) -> PyResult<block::Q> {
    let r = if let Ok(s) = x.extract::<String>() {
        block::parse_rational(&s)
    } else {
        block::rational_from_f64(x.extract::<f64>()?)
    };
    r.map_err(err)
}

#[pymethods]
impl PyBlockSpec {
    #[new]
    #[pyo3(signature = (alpha, delta, l))]
    fn new(alpha: &Bound<'_, PyAny>, delta: &Bound<'_, PyAny>, l: i64) -> PyResult<Self> {
        BlockSpec::new(rational_arg(alpha)?, rational_arg(delta)?, l).map(PyBlockSpec).map_err(err)
    }

    #[staticmethod]
    fn smallest(max_l: i64) -> Option<Self> {
        block::smallest_nondegenerate_spec(max_l).map(PyBlockSpec)
    }

    #[getter]
    fn alpha(&self) -> f64 {
        block::q_to_f64(self.0.alpha())
    }

    #[getter]
    fn delta(&self) -> f64 {
        block::q_to_f64(self.0.delta())
    }

    #[getter(L)]
    fn l(&self) -> i64 {
        self.0.l()
    }

    fn geometry(&self, py: Python<'_>, n: i64, m: i64) -> PyResult<Py<PyAny>> {
        to_py(py, &block::block_geometry(&self.0, n, m).map_err(err)?)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0)
    }

    fn __repr__(&self) -> String {
        format!("BlockSpec(alpha={}, delta={}, L={})", self.0.alpha(), self.0.delta(), self.0.l())
    }
}

#[pyfunction]
fn death_time(py: Python<'_>, env: &PyEnvField, p: f64, horizon: usize) -> PyResult<Py<PyAny>> {
    ext(py, operc::death_time(&env.0, p, horizon).map_err(err)?)
}

/// `ubar_n` for `n = 0..=horizon` with starters down to `-k`, and whether
/// the path was truncated.
#[pyfunction]
fn ubar_path(py: Python<'_>, env: &PyEnvField, p: f64, horizon: usize, k: i64) -> PyResult<(Vec<Py<PyAny>>, bool)> {
    let (u, truncated) = operc::ubar_path(&env.0, p, horizon, k).map_err(err)?;
    Ok((u.into_iter().map(|v| ext(py, v)).collect::<PyResult<_>>()?, truncated))
}

/// Frontier edges from the origin.
#[pyfunction]
fn run_xi(py: Python<'_>, env: &PyEnvField, p: f64, horizon: usize) -> PyResult<Py<PyAny>> {
    to_py(py, &operc::run_xi(&env.0, p, &StarterSpec::origin(), horizon).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (p, n_levels, k=None, replicas=1000, seed=1, workers=None))]
fn estimate_alpha(
    py: Python<'_>,
    p: f64,
    n_levels: usize,
    k: Option<i64>,
    replicas: usize,
    seed: u64,
    workers: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let r = py.detach(|| estimators::estimate_alpha(p, n_levels, k, &mc(replicas, seed, workers)));
    to_py(py, &r.map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (p, horizon, replicas=1000, seed=1, workers=None))]
fn estimate_theta(py: Python<'_>, p: f64, horizon: usize, replicas: usize, seed: u64, workers: Option<usize>) -> PyResult<Py<PyAny>> {
    let r = py.detach(|| estimators::estimate_theta(p, horizon, &mc(replicas, seed, workers)));
    to_py(py, &r.map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (p, columns, alpha_levels=None, replicas=300, seed=1, workers=None))]
fn estimate_rho(
    py: Python<'_>,
    p: f64,
    columns: usize,
    alpha_levels: Option<usize>,
    replicas: usize,
    seed: u64,
    workers: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let r = py.detach(|| estimators::estimate_rho(p, columns, alpha_levels, &mc(replicas, seed, workers)));
    to_py(py, &r.map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (threshold, horizon, tolerance=0.01, replicas=1000, seed=1, workers=None))]
fn scan_pc(
    py: Python<'_>,
    threshold: f64,
    horizon: usize,
    tolerance: f64,
    replicas: usize,
    seed: u64,
    workers: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let r = py.detach(|| estimators::scan_pc(threshold, horizon, tolerance, &mc(replicas, seed, workers)));
    to_py(py, &r.map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (p, n_min, n_max, death_horizon, replicas=100_000, seed=1, workers=None))]
#[allow(clippy::too_many_arguments)]
fn fit_tail_tau(
    py: Python<'_>,
    p: f64,
    n_min: usize,
    n_max: usize,
    death_horizon: usize,
    replicas: usize,
    seed: u64,
    workers: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let cfg = mc(replicas, seed, workers);
    let r = py.detach(|| estimators::fit_tail_tau(p, n_min, n_max, death_horizon, &cfg));
    to_py(py, &r.map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (p, alpha_prime, n_max, replicas=20_000, seed=1, workers=None))]
fn fit_tail_upper(
    py: Python<'_>,
    p: f64,
    alpha_prime: f64,
    n_max: usize,
    replicas: usize,
    seed: u64,
    workers: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let r = py.detach(|| estimators::fit_tail_upper(p, alpha_prime, n_max, &mc(replicas, seed, workers)));
    to_py(py, &r.map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (p_grid, n_levels, replicas=300, seed=1, workers=None))]
fn monotonicity_report(
    py: Python<'_>,
    p_grid: Vec<f64>,
    n_levels: usize,
    replicas: usize,
    seed: u64,
    workers: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let r = py.detach(|| estimators::monotonicity_report(&p_grid, n_levels, &mc(replicas, seed, workers)));
    to_py(py, &r.map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (p_grid, horizon, replicas=10_000, seed=1, workers=None))]
fn verify_invariants(
    py: Python<'_>,
    p_grid: Vec<f64>,
    horizon: usize,
    replicas: usize,
    seed: u64,
    workers: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let cfg = mc(replicas, seed, workers);
    let r = py.detach(|| verify::verify_invariants(&p_grid, horizon, &Check::ALL, &cfg));
    to_py(py, &r.map_err(err)?)
}

#[pyfunction]
fn exact_tau_dist(py: Python<'_>, p: f64, n_max: usize) -> PyResult<Py<PyAny>> {
    to_py(py, &py.detach(|| oracle::exact_tau_dist(p, n_max)).map_err(err)?)
}

/// Distribution of `ubar_n`; starters at the origin, or the half-line of
/// both columns down to `floor` when it is given.
#[pyfunction]
#[pyo3(signature = (p, n, floor=None))]
fn exact_dist_u(py: Python<'_>, p: f64, n: usize, floor: Option<i64>) -> PyResult<Py<PyAny>> {
    let start = floor.map_or_else(StarterSpec::origin, |f| StarterSpec::below(0, f));
    to_py(py, &py.detach(|| oracle::exact_dist_u(p, n, &start)).map_err(err)?)
}

#[pyfunction]
fn exact_crossing(py: Python<'_>, p: f64, spec: &PyBlockSpec) -> PyResult<Py<PyAny>> {
    to_py(py, &py.detach(|| oracle::exact_crossing(p, &spec.0)).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (p, n, slack=oracle::DEFAULT_SLACK))]
fn exact_addingpoints(py: Python<'_>, p: f64, n: usize, slack: usize) -> PyResult<Py<PyAny>> {
    to_py(py, &oracle::exact_addingpoints(p, n, slack).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (eps, n, q=None))]
fn peierls_bound(py: Python<'_>, eps: f64, n: u64, q: Option<f64>) -> PyResult<Py<PyAny>> {
    to_py(py, &block::peierls_bound(eps, n, q).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (p, spec, replicas=1000, seed=1, workers=None))]
fn splice_report(
    py: Python<'_>,
    p: f64,
    spec: &PyBlockSpec,
    replicas: usize,
    seed: u64,
    workers: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let r = py.detach(|| block::splice_report(p, &spec.0, &mc(replicas, seed, workers)));
    to_py(py, &r.map_err(err)?)
}

#[pymodule]
fn operc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HASH_SPEC", operc::HASH_SPEC)?;
    m.add_class::<PyEnvField>()?;
    m.add_class::<PyBlockSpec>()?;
    m.add_function(wrap_pyfunction!(death_time, m)?)?;
    m.add_function(wrap_pyfunction!(ubar_path, m)?)?;
    m.add_function(wrap_pyfunction!(run_xi, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_theta, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_rho, m)?)?;
    m.add_function(wrap_pyfunction!(scan_pc, m)?)?;
    m.add_function(wrap_pyfunction!(fit_tail_tau, m)?)?;
    m.add_function(wrap_pyfunction!(fit_tail_upper, m)?)?;
    m.add_function(wrap_pyfunction!(monotonicity_report, m)?)?;
    m.add_function(wrap_pyfunction!(verify_invariants, m)?)?;
    m.add_function(wrap_pyfunction!(exact_tau_dist, m)?)?;
    m.add_function(wrap_pyfunction!(exact_dist_u, m)?)?;
    m.add_function(wrap_pyfunction!(exact_crossing, m)?)?;
    m.add_function(wrap_pyfunction!(exact_addingpoints, m)?)?;
    m.add_function(wrap_pyfunction!(peierls_bound, m)?)?;
    m.add_function(wrap_pyfunction!(splice_report, m)?)?;
    Ok(())
}
