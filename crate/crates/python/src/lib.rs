//! Python bindings: `import pyimann`.

use std::cell::RefCell;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use imann::baseline::{self, DnnSpec, TrainConfig};
use imann::benchmarks::{self, ModelFormulation};
use imann::cmaes::{self, CmaConfig};
use imann::harness::{self, ExperimentConfig, Method, RunRecord};
use imann::hybrid::{self, Dataset};
use imann::network::{self, WeightVector};
use imann::quadrature;

fn py_err(e: imann::Error) -> PyErr {
    match e {
        imann::Error::Io { .. } | imann::Error::Csv { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Gauss-Legendre nodes and weights with `n` points on `[lo, hi]`.
#[pyfunction]
#[pyo3(signature = (n, lo = -1.0, hi = 1.0))]
fn gauss_legendre(n: usize, lo: f64, hi: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let rule = quadrature::gauss_legendre_rule(n).map_err(py_err)?;
    let rule = quadrature::map_rule(&rule, lo, hi).map_err(py_err)?;
    Ok((rule.nodes().to_vec(), rule.weights().to_vec()))
}

/// Wraps a Python callable taking a coordinate list. The first exception
/// raised is kept and re-raised by the caller.
struct Callback<'py> {
    f: Bound<'py, PyAny>,
    error: RefCell<Option<PyErr>>,
}

impl<'py> Callback<'py> {
    fn new(f: Bound<'py, PyAny>) -> Self {
        Self {
            f,
            error: RefCell::new(None),
        }
    }

    fn call(&self, x: &[f64]) -> f64 {
        if self.error.borrow().is_some() {
            return f64::NAN;
        }
        match self.f.call1((x.to_vec(),)).and_then(|v| v.extract::<f64>()) {
            Ok(v) => v,
            Err(e) => {
                *self.error.borrow_mut() = Some(e);
                f64::NAN
            }
        }
    }

    fn finish<T>(self, result: imann::Result<T>) -> PyResult<T> {
        match self.error.into_inner() {
            Some(e) => Err(e),
            None => result.map_err(py_err),
        }
    }
}

fn domain(bounds: Vec<(f64, f64)>) -> PyResult<quadrature::Domain> {
    quadrature::Domain::new(bounds).map_err(py_err)
}

/// Tensor-product Gauss-Legendre integral of `f(x)` over a 1-D or 2-D box.
#[pyfunction]
#[pyo3(signature = (f, bounds, points_per_dim = quadrature::DEFAULT_POINTS_PER_DIM))]
fn integrate(f: Bound<'_, PyAny>, bounds: Vec<(f64, f64)>, points_per_dim: usize) -> PyResult<f64> {
    let d = domain(bounds)?;
    let cb = Callback::new(f);
    let r = quadrature::integrate(|x| cb.call(x), &d, points_per_dim);
    cb.finish(r)
}

/// `∫ |predict(x) - target(x)| dx` over a 1-D or 2-D box.
#[pyfunction]
#[pyo3(signature = (predict, target, bounds, points_per_dim = quadrature::DEFAULT_POINTS_PER_DIM))]
fn error_integral(
    predict: Bound<'_, PyAny>,
    target: Bound<'_, PyAny>,
    bounds: Vec<(f64, f64)>,
    points_per_dim: usize,
) -> PyResult<f64> {
    let d = domain(bounds)?;
    let p = Callback::new(predict);
    let t = Callback::new(target);
    let r = quadrature::error_integral(|x| p.call(x), |x| t.call(x), &d, points_per_dim);
    if let Some(e) = t.error.take() {
        return Err(e);
    }
    p.finish(r)
}

/// Number of weights and biases of a hybrid network, e.g. `"1-5-5-1"` -> 47.
#[pyfunction]
fn dimensionality(arch: &str) -> PyResult<usize> {
    let spec: network::NetworkSpec = arch.parse().map_err(py_err)?;
    Ok(spec.dimensionality())
}

/// Ids of the registered model formulations.
#[pyfunction]
fn formulations() -> Vec<String> {
    benchmarks::registry().iter().map(|f| f.id.to_string()).collect()
}

#[pyclass(name = "Formulation", frozen)]
struct PyFormulation {
    inner: ModelFormulation,
}

#[pymethods]
impl PyFormulation {
    #[new]
    fn new(id: &str) -> PyResult<Self> {
        Ok(Self {
            inner: benchmarks::formulation(id).map_err(py_err)?,
        })
    }

    #[getter]
    fn id(&self) -> &str {
        self.inner.id
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn subfunction_count(&self) -> usize {
        self.inner.subfunction_count
    }

    #[getter]
    fn bounds(&self) -> Vec<(f64, f64)> {
        self.inner.domain().bounds().to_vec()
    }

    fn target(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.evaluate_target(&x).map_err(py_err)
    }

    fn combine(&self, x: Vec<f64>, s: Vec<f64>) -> PyResult<f64> {
        self.inner.combine(&x, &s).map_err(py_err)
    }

    fn ideal_subfunctions(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.ideal_subfunctions(&x).map_err(py_err)
    }

    /// Equispaced training grid of `size` points with target labels.
    fn grid(&self, size: usize) -> PyResult<Vec<(Vec<f64>, f64)>> {
        Ok(harness::grid_dataset(&self.inner, size)
            .map_err(py_err)?
            .points()
            .to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Formulation('{}')", self.inner.id)
    }
}

fn dataset(f: &ModelFormulation, points: Vec<(Vec<f64>, f64)>) -> PyResult<Dataset> {
    Dataset::new(f, points).map_err(py_err)
}

#[pyclass(name = "HybridPredictor", frozen)]
struct PyHybridPredictor {
    inner: hybrid::HybridPredictor,
}

#[pymethods]
impl PyHybridPredictor {
    #[new]
    fn new(arch: &str, formulation: &str, weights: Vec<f64>) -> PyResult<Self> {
        let spec: network::NetworkSpec = arch.parse().map_err(py_err)?;
        let f = benchmarks::formulation(formulation).map_err(py_err)?;
        let w = WeightVector::new(&spec, weights).map_err(py_err)?;
        Ok(Self {
            inner: hybrid::HybridPredictor::new(spec, w, f).map_err(py_err)?,
        })
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn subfunctions(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.subfunctions(&x).map_err(py_err)
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.predict(&x).map_err(py_err)
    }

    /// Sum of squared residuals on `(x, y)` pairs.
    fn fitness(&self, points: Vec<(Vec<f64>, f64)>) -> PyResult<f64> {
        Ok(self.inner.fitness(&dataset(self.inner.formulation(), points)?))
    }

    /// Error integral against the formulation's target over its domain.
    #[pyo3(signature = (points_per_dim = quadrature::DEFAULT_POINTS_PER_DIM))]
    fn error_integral(&self, points_per_dim: usize) -> PyResult<f64> {
        let f = self.inner.formulation();
        quadrature::error_integral(
            |x| self.inner.predict(x).unwrap_or(f64::NAN),
            |x| f.evaluate_target(x).unwrap_or(f64::NAN),
            f.domain(),
            points_per_dim,
        )
        .map_err(py_err)
    }
}

/// Minimizes `f(x)` with CMA-ES starting from `x0`.
#[pyfunction]
#[pyo3(signature = (f, x0, sigma = cmaes::DEFAULT_INITIAL_SIGMA, max_evaluations = 100_000, fitness_target = 1e-12, seed = 0, population = None))]
#[allow(clippy::too_many_arguments)]
fn cma_minimize<'py>(
    py: Python<'py>,
    f: Bound<'py, PyAny>,
    x0: Vec<f64>,
    sigma: f64,
    max_evaluations: usize,
    fitness_target: f64,
    seed: u64,
    population: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut c = CmaConfig::new(x0.len(), seed);
    c.initial_mean = x0;
    c.initial_sigma = sigma;
    c.max_evaluations = max_evaluations;
    c.fitness_target = fitness_target;
    if let Some(p) = population {
        c.population = p;
    }
    let cb = Callback::new(f);
    let r = cmaes::optimize(|x| cb.call(x), &c);
    let r = cb.finish(r)?;
    let d = PyDict::new(py);
    d.set_item("x", r.best_vector)?;
    d.set_item("fitness", r.best_fitness)?;
    d.set_item("evaluations", r.evaluations_used)?;
    d.set_item("history", r.history)?;
    d.set_item("termination", format!("{:?}", r.termination))?;
    d.set_item("abort_reason", r.abort_reason)?;
    Ok(d)
}

/// Trains a hybrid network on `points` and returns a fitted predictor.
#[pyfunction]
#[pyo3(signature = (arch, formulation, points, sigma = cmaes::DEFAULT_INITIAL_SIGMA, max_evaluations = 100_000, seed = 0))]
fn train_hybrid(
    arch: &str,
    formulation: &str,
    points: Vec<(Vec<f64>, f64)>,
    sigma: f64,
    max_evaluations: usize,
    seed: u64,
) -> PyResult<(PyHybridPredictor, f64)> {
    let spec: network::NetworkSpec = arch.parse().map_err(py_err)?;
    let f = benchmarks::formulation(formulation).map_err(py_err)?;
    let data = dataset(&f, points)?;
    let objective = hybrid::objective_for(&spec, &f, &data).map_err(py_err)?;
    let mut c = CmaConfig::new(spec.dimensionality(), seed);
    c.initial_sigma = sigma;
    c.max_evaluations = max_evaluations;
    let r = cmaes::optimize(&objective, &c).map_err(py_err)?;
    let w = WeightVector::new(&spec, r.best_vector).map_err(py_err)?;
    let p = hybrid::HybridPredictor::new(spec, w, f).map_err(py_err)?;
    Ok((PyHybridPredictor { inner: p }, r.best_fitness))
}

/// Trains a dense baseline network with full-batch Adam.
#[pyfunction]
#[pyo3(signature = (arch, points, learning_rate = 1e-3, max_epochs = 20_000, plateau_patience = 1000, seed = 0))]
fn train_dnn<'py>(
    py: Python<'py>,
    arch: &str,
    points: Vec<(Vec<f64>, f64)>,
    learning_rate: f64,
    max_epochs: usize,
    plateau_patience: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec: DnnSpec = arch.parse().map_err(py_err)?;
    let cfg = TrainConfig {
        learning_rate,
        max_epochs,
        plateau_patience,
        seed,
    };
    let r = baseline::train_dnn(&spec, &points, &cfg).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("epochs", r.epochs())?;
    d.set_item("weights", r.weights)?;
    d.set_item("loss", r.loss)?;
    d.set_item("aborted", r.aborted)?;
    Ok(d)
}

#[pyfunction]
fn dnn_forward(arch: &str, weights: Vec<f64>, x: Vec<f64>) -> PyResult<f64> {
    let spec: DnnSpec = arch.parse().map_err(py_err)?;
    baseline::dnn_forward(&spec, &weights, &x).map_err(py_err)
}

fn record_dict<'py>(py: Python<'py>, r: &RunRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("formulation", &r.formulation)?;
    d.set_item("method", r.method.to_string())?;
    d.set_item("arch", &r.arch)?;
    d.set_item("dataset_size", r.dataset_size)?;
    d.set_item("restart_index", r.restart_index)?;
    d.set_item("seed", r.seed)?;
    d.set_item("fitness", r.fitness)?;
    d.set_item("error_integral", r.error_integral)?;
    d.set_item("evals", r.evals)?;
    d.set_item("wall_time_ms", r.wall_time_ms)?;
    d.set_item("status", r.status.to_string())?;
    Ok(d)
}

type Records<'py> = Vec<Bound<'py, PyDict>>;

/// Best-of-`restarts` experiment. Returns `(attempts, best)` as lists of
/// record dicts; writes CSV files when `out` is given.
#[pyfunction]
#[pyo3(signature = (formulation, method, arch = None, sizes = None, restarts = 20, seed = 0, quad_points = quadrature::DEFAULT_POINTS_PER_DIM, cma_max_evals = None, dnn_epochs = None, out = None))]
#[allow(clippy::too_many_arguments)]
fn run_experiment<'py>(
    py: Python<'py>,
    formulation: &str,
    method: &str,
    arch: Option<String>,
    sizes: Option<Vec<usize>>,
    restarts: usize,
    seed: u64,
    quad_points: usize,
    cma_max_evals: Option<usize>,
    dnn_epochs: Option<usize>,
    out: Option<PathBuf>,
) -> PyResult<(Records<'py>, Records<'py>)> {
    let method: Method = method.parse().map_err(py_err)?;
    let mut c = ExperimentConfig::new(formulation, method).map_err(py_err)?;
    if let Some(a) = arch {
        c.arch = a;
    }
    if let Some(s) = sizes {
        c.sizes = s;
    }
    c.restarts = restarts;
    c.base_seed = seed;
    c.quad_points = quad_points;
    if let Some(v) = cma_max_evals {
        c.cma.max_evaluations = v;
    }
    if let Some(v) = dnn_epochs {
        c.dnn.max_epochs = v;
    }
    let r = py
        .detach(|| harness::run_experiment(&c))
        .map_err(py_err)?;
    if let Some(dir) = out {
        harness::emit_csv(&r.attempts, &dir.join("attempts.csv")).map_err(py_err)?;
        harness::emit_csv(&r.best, &dir.join("best.csv")).map_err(py_err)?;
        harness::emit_plot_data(&r.best, &dir.join("plot")).map_err(py_err)?;
    }
    let attempts = r.attempts.iter().map(|x| record_dict(py, x)).collect::<PyResult<_>>()?;
    let best = r.best.iter().map(|x| record_dict(py, x)).collect::<PyResult<_>>()?;
    Ok((attempts, best))
}

#[pymodule]
fn pyimann(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(gauss_legendre, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(error_integral, m)?)?;
    m.add_function(wrap_pyfunction!(dimensionality, m)?)?;
    m.add_function(wrap_pyfunction!(formulations, m)?)?;
    m.add_function(wrap_pyfunction!(cma_minimize, m)?)?;
    m.add_function(wrap_pyfunction!(train_hybrid, m)?)?;
    m.add_function(wrap_pyfunction!(train_dnn, m)?)?;
    m.add_function(wrap_pyfunction!(dnn_forward, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_class::<PyFormulation>()?;
    m.add_class::<PyHybridPredictor>()?;
    Ok(())
}
