use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use orderstat_core::montecarlo::{self, RunConfig, Statistic};
use orderstat_core::report::BoundReport;
use orderstat_core::thresholds;
use orderstat_core::verify::identities;
use orderstat_core::verify::lemmas::lemma_grid;
use orderstat_core::verify::suite::{run_suite, GridConfig, Suite, SuiteConfig};
use orderstat_core::{marginals, models, Error};

fn err(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Config(_) | Error::Model(_) | Error::Capability(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize + ?Sized>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A one-dimensional law from the catalog.
#[pyclass(module = "orderstat", frozen, from_py_object)]
#[derive(Clone)]
struct Marginal(marginals::Marginal);

#[pymethods]
impl Marginal {
    #[staticmethod]
    fn gaussian(sigma: f64) -> PyResult<Self> {
        marginals::Marginal::gaussian(sigma).map(Self).map_err(err)
    }

    #[staticmethod]
    fn laplace(scale: f64) -> PyResult<Self> {
        marginals::Marginal::laplace(scale).map(Self).map_err(err)
    }

    #[staticmethod]
    fn uniform(halfwidth: f64) -> PyResult<Self> {
        marginals::Marginal::uniform(halfwidth).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (rate, centered = true))]
    fn shifted_exponential(rate: f64, centered: bool) -> PyResult<Self> {
        marginals::Marginal::shifted_exponential(rate, centered).map(Self).map_err(err)
    }

    /// `{"family": ..., "params": {...}}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(Self).map_err(|e| PyValueError::new_err(format!("invalid marginal JSON: {e}")))
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("marginal serializes")
    }

    /// `P(|Y| >= t)`.
    fn survival_abs(&self, t: f64) -> PyResult<f64> {
        self.0.survival_abs(t).map_err(err)
    }

    /// `E|Y| 1{|Y| >= t}`.
    fn truncated_abs_mean(&self, t: f64) -> PyResult<f64> {
        self.0.truncated_abs_mean(t).map_err(err)
    }

    /// `(E|Y|^p)^{1/p}`.
    fn moment_p(&self, p: f64) -> PyResult<f64> {
        self.0.moment_p(p).map_err(err)
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.0.mean()
    }

    #[getter]
    fn variance(&self) -> f64 {
        self.0.variance()
    }

    fn __repr__(&self) -> String {
        format!("Marginal({})", self.0.label())
    }
}

/// Joint law of a random vector.
#[pyclass(module = "orderstat", frozen)]
struct VectorModel(models::VectorModel);

#[pymethods]
impl VectorModel {
    /// Model file contents: `{"kind": ..., "n": ..., "params": ...}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let cfg = models::ModelConfig::from_json(text).map_err(err)?;
        cfg.build().map(Self).map_err(err)
    }

    #[staticmethod]
    fn iid(marginal: &Marginal, n: usize) -> PyResult<Self> {
        models::VectorModel::iid(marginal.0.clone(), n).map(Self).map_err(err)
    }

    #[staticmethod]
    fn independent(marginals: Vec<Marginal>) -> PyResult<Self> {
        models::VectorModel::independent(marginals.into_iter().map(|m| m.0).collect()).map(Self).map_err(err)
    }

    /// Centered Gaussian with the given covariance rows.
    #[staticmethod]
    fn gaussian(covariance: Vec<Vec<f64>>) -> PyResult<Self> {
        let n = covariance.len();
        if covariance.iter().any(|r| r.len() != n) {
            return Err(PyValueError::new_err(format!("covariance must be {n}x{n}")));
        }
        let cov = models::Covariance::new(n, covariance.concat()).map_err(err)?;
        models::VectorModel::gaussian(cov).map(Self).map_err(err)
    }

    /// `(ε_1 g, ..., ε_n g)`.
    #[staticmethod]
    fn sign_shared_gaussian(n: usize) -> PyResult<Self> {
        models::VectorModel::sign_shared_gaussian(n).map(Self).map_err(err)
    }

    /// `(g, ..., g)`.
    #[staticmethod]
    fn fully_correlated_gaussian(n: usize) -> PyResult<Self> {
        models::VectorModel::fully_correlated_gaussian(n).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (n, halfwidth = 3f64.sqrt()))]
    fn uniform_cube(n: usize, halfwidth: f64) -> PyResult<Self> {
        models::VectorModel::uniform_cube(n, halfwidth).map(Self).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label()
    }

    fn marginals(&self) -> PyResult<Vec<Marginal>> {
        Ok(self.0.marginals().map_err(err)?.into_iter().map(Marginal).collect())
    }

    /// Hypothesis flags of the law as a dict.
    fn hypotheses<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.hypotheses())
    }

    /// `count` draws as a list of rows.
    #[pyo3(signature = (count, seed, stream = 0))]
    fn sample(&self, py: Python<'_>, count: usize, seed: u64, stream: u64) -> PyResult<Vec<Vec<f64>>> {
        let batch = py.detach(|| self.0.sample(count, seed, stream)).map_err(err)?;
        Ok(batch.rows().map(<[f64]>::to_vec).collect())
    }

    fn __repr__(&self) -> String {
        format!("VectorModel({}, n={})", self.0.label(), self.0.dim())
    }
}

/// `t(k, X)` from the marginals of `model`.
#[pyfunction]
fn t_threshold<'py>(py: Python<'py>, model: &VectorModel, k: f64) -> PyResult<Bound<'py, PyAny>> {
    let r = thresholds::t_threshold(&model.0.marginals().map_err(err)?, k).map_err(err)?;
    to_py(py, &r)
}

/// `t*(p, X)` from the marginals of `model`.
#[pyfunction]
fn tstar_threshold<'py>(py: Python<'py>, model: &VectorModel, p: f64) -> PyResult<Bound<'py, PyAny>> {
    let r = thresholds::tstar_threshold(&model.0.marginals().map_err(err)?, p).map_err(err)?;
    to_py(py, &r)
}

/// Monte Carlo estimates of statistics such as `"topk:16"` or `"kmax:3"`.
#[pyfunction]
#[pyo3(signature = (model, stats, count, seed, stream = 0, threads = None))]
fn estimate<'py>(
    py: Python<'py>,
    model: &VectorModel,
    stats: Vec<String>,
    count: usize,
    seed: u64,
    stream: u64,
    threads: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let stats = stats.iter().map(|s| s.parse::<Statistic>()).collect::<Result<Vec<_>, _>>().map_err(err)?;
    let cfg = RunConfig::new(count, seed).stream(stream).threads(threads);
    let est = py.detach(|| montecarlo::estimate_many(&model.0, &stats, &cfg)).map_err(err)?;
    to_py(py, &est)
}

fn reports<'py>(py: Python<'py>, r: orderstat_core::Result<Vec<BoundReport>>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &r.map_err(err)?)
}

/// Run a check suite; `grid` is a grid JSON string, `"default"` or `"empty"`.
#[pyfunction]
#[pyo3(signature = (suite = "all", grid = "default", samples = 20_000, seed = 0))]
fn verify<'py>(py: Python<'py>, suite: &str, grid: &str, samples: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let suite: Suite = suite.parse().map_err(err)?;
    let grid = match grid {
        "default" => GridConfig::default_grid(),
        "empty" => GridConfig::default(),
        text => GridConfig::from_json(text).map_err(err)?,
    };
    let cfg = SuiteConfig::new(suite, grid, samples, seed);
    let r = py.detach(|| run_suite(&cfg));
    reports(py, r)
}

/// Marginal-level lemma grid over the catalog.
#[pyfunction]
fn lemmas(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    reports(py, lemma_grid(&marginals::catalog()))
}

/// Exact step-integral identity and by-parts identities.
#[pyfunction]
#[pyo3(signature = (samples = 20_000, seed = 0, vectors = 100))]
fn identity(py: Python<'_>, samples: usize, seed: u64, vectors: usize) -> PyResult<Bound<'_, PyAny>> {
    let r = py.detach(|| {
        let mut out = vec![identities::step_identity_check(vectors, seed)?];
        out.extend(identities::byparts_suite(samples, seed)?);
        Ok(out)
    });
    reports(py, r)
}

#[pymodule]
fn orderstat(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Marginal>()?;
    m.add_class::<VectorModel>()?;
    m.add_function(wrap_pyfunction!(t_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(tstar_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(lemmas, m)?)?;
    m.add_function(wrap_pyfunction!(identity, m)?)?;
    Ok(())
}
