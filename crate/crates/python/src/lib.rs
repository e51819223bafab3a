//! Python module `tilt_frontier`: tilted objective, models, solver, frontier
//! sweeps and numerical checks.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use tilt_frontier::data::{self, CsvOptions, Noise, SyntheticConfig, SyntheticKind};
use tilt_frontier::frontier::{self, FrontierRecord};
use tilt_frontier::loss_core::{self, GroupPartition, LossProfile, TiltParam};
use tilt_frontier::models::{self, Activation, ParamVector};
use tilt_frontier::solver::{self, SolveReport, SolverConfig};
use tilt_frontier::verify;
use tilt_frontier::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io { .. } => PyIOError::new_err(err.to_string()),
        Error::Divergence { .. } => PyRuntimeError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn profile(losses: Vec<f64>) -> PyResult<LossProfile> {
    LossProfile::new(losses).map_err(to_py)
}

fn tilt(lambda: f64) -> PyResult<TiltParam> {
    TiltParam::new(lambda).map_err(to_py)
}

/// `(1/lambda) ln((1/n) sum exp(lambda l_i))`, computed stably.
#[pyfunction]
fn tilted_value(losses: Vec<f64>, lam: f64) -> PyResult<f64> {
    Ok(loss_core::tilted_value(&profile(losses)?, tilt(lam)?))
}

/// Softmax of `lambda * losses`.
#[pyfunction]
fn tilt_weights(losses: Vec<f64>, lam: f64) -> PyResult<Vec<f64>> {
    Ok(loss_core::tilt_weights(&profile(losses)?, tilt(lam)?))
}

/// Tilted value of the within-group average losses; `groups` lists the
/// member indices of every group.
#[pyfunction]
fn group_tilted_value(losses: Vec<f64>, groups: Vec<Vec<usize>>, lam: f64) -> PyResult<f64> {
    let n = losses.len();
    let mut assignment = vec![Vec::new(); n];
    for (g, members) in groups.iter().enumerate() {
        for &i in members {
            if i >= n {
                return Err(PyValueError::new_err(format!(
                    "member index {i} out of range for {n} losses"
                )));
            }
            assignment[i].push(g);
        }
    }
    let partition = GroupPartition::new(assignment, groups.len()).map_err(to_py)?;
    loss_core::group_tilted_value(&profile(losses)?, &partition, tilt(lam)?).map_err(to_py)
}

/// Tilted value with the mean, max and mixing coefficient gamma
/// (`None` for a constant profile).
#[pyfunction]
fn decompose<'py>(py: Python<'py>, losses: Vec<f64>, lam: f64) -> PyResult<Bound<'py, PyDict>> {
    let d = loss_core::decompose(&profile(losses)?, tilt(lam)?);
    let out = PyDict::new(py);
    out.set_item("value", d.value)?;
    out.set_item("mean_loss", d.mean_loss)?;
    out.set_item("max_loss", d.max_loss)?;
    out.set_item("gamma", d.gamma)?;
    Ok(out)
}

/// `mean + (1 - gamma) / gamma * max`.
#[pyfunction]
fn penalized_value(losses: Vec<f64>, gamma: f64) -> PyResult<f64> {
    loss_core::penalized_value(&profile(losses)?, gamma).map_err(to_py)
}

/// Constant step `1 / (c_max + 2 c lambda)`.
#[pyfunction]
fn fixed_step_size(c: f64, c_max: f64, lam: f64) -> PyResult<f64> {
    solver::fixed_step_size(c, c_max, lam).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (min=1e-3, max=1e2, count=25))]
fn geometric_grid(min: f64, max: f64, count: usize) -> PyResult<Vec<f64>> {
    solver::geometric_grid(min, max, count).map_err(to_py)
}

/// A model family and its input dimension.
#[pyclass(name = "ModelSpec", frozen)]
struct PyModelSpec {
    inner: models::ModelSpec,
}

#[pymethods]
impl PyModelSpec {
    /// `name` is `linear`, `logistic` or `mlpK` (K hidden layers of width
    /// `hidden`).
    #[new]
    #[pyo3(signature = (name, input_dim, hidden=models::DEFAULT_HIDDEN_WIDTH, activation="relu", intercept=true))]
    fn new(
        name: &str,
        input_dim: usize,
        hidden: usize,
        activation: &str,
        intercept: bool,
    ) -> PyResult<Self> {
        let activation: Activation = activation
            .parse()
            .map_err(|_| PyValueError::new_err(format!("unknown activation `{activation}`")))?;
        let mut inner =
            models::ModelSpec::from_name(name, input_dim, hidden, activation).map_err(to_py)?;
        if !intercept {
            inner = inner.without_intercept();
        }
        Ok(Self { inner })
    }

    #[getter]
    fn model_id(&self) -> String {
        self.inner.model_id()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    #[getter]
    fn is_convex(&self) -> bool {
        self.inner.is_convex()
    }

    fn init_params(&self, seed: u64) -> Vec<f64> {
        self.inner.init_params(seed).into_inner()
    }

    fn zero_params(&self) -> Vec<f64> {
        self.inner.zero_params().into_inner()
    }

    /// Network output: prediction for regression, logit for classifiers.
    fn predict(&self, theta: Vec<f64>, x: Vec<f64>) -> PyResult<f64> {
        self.inner.predict(&theta, &x).map_err(to_py)
    }

    fn loss_profile(&self, theta: Vec<f64>, dataset: &PyDataset) -> PyResult<Vec<f64>> {
        let p = models::loss_profile(&self.inner, &theta, &dataset.inner).map_err(to_py)?;
        Ok(p.losses().to_vec())
    }

    /// Tilted objective and its gradient.
    fn objective_and_grad(
        &self,
        theta: Vec<f64>,
        dataset: &PyDataset,
        lam: f64,
    ) -> PyResult<(f64, Vec<f64>)> {
        models::tilted_objective_and_grad(&self.inner, &theta, &dataset.inner, tilt(lam)?)
            .map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "ModelSpec('{}', input_dim={})",
            self.inner.model_id(),
            self.inner.input_dim
        )
    }
}

/// Features, targets and optional group labels.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset {
    inner: data::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (rows, targets, groups=None))]
    fn new(rows: Vec<Vec<f64>>, targets: Vec<f64>, groups: Option<Vec<String>>) -> PyResult<Self> {
        Ok(Self {
            inner: data::Dataset::from_rows(rows, targets, groups).map_err(to_py)?,
        })
    }

    /// Loads a headered CSV; non-numeric features are one-hot encoded and
    /// rows with empty cells dropped.
    #[staticmethod]
    #[pyo3(signature = (path, target, group=None, positive_label=None, classification=true))]
    fn from_csv(
        path: &str,
        target: &str,
        group: Option<String>,
        positive_label: Option<String>,
        classification: bool,
    ) -> PyResult<Self> {
        let load = data::load_csv(
            path,
            &CsvOptions {
                target: target.to_string(),
                group,
                positive_label,
                classification,
            },
        )
        .map_err(to_py)?;
        Ok(Self {
            inner: load.dataset,
        })
    }

    /// Seeded synthetic data: `linear-noise` or `two-group-logistic`.
    #[staticmethod]
    #[pyo3(signature = (kind="linear-noise", n=200, p=3, noise="gaussian", sigma=1.0, rate=1.0, group_imbalance=0.3, seed=0, feature_mean=0.0))]
    #[allow(clippy::too_many_arguments)]
    fn synthetic(
        kind: &str,
        n: usize,
        p: usize,
        noise: &str,
        sigma: f64,
        rate: f64,
        group_imbalance: f64,
        seed: u64,
        feature_mean: f64,
    ) -> PyResult<Self> {
        let kind = match kind {
            "linear-noise" => SyntheticKind::LinearNoise,
            "two-group-logistic" => SyntheticKind::TwoGroupLogistic,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown synthetic kind `{other}`"
                )))
            }
        };
        let noise = match noise {
            "gaussian" => Noise::Gaussian { sigma },
            "skewed" => Noise::SkewedExponential { rate },
            other => return Err(PyValueError::new_err(format!("unknown noise `{other}`"))),
        };
        let synthetic = data::generate(&SyntheticConfig {
            kind,
            n,
            p,
            noise,
            group_imbalance,
            seed,
            feature_mean,
            theta_star: None,
        })
        .map_err(to_py)?;
        Ok(Self {
            inner: synthetic.dataset,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn targets(&self) -> Vec<f64> {
        self.inner.targets().to_vec()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names().to_vec()
    }

    #[getter]
    fn group_names(&self) -> Option<Vec<String>> {
        self.inner.group_names()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.rows().map(|r| r.to_vec()).collect()
    }

    /// Seeded `(train, test)` split.
    #[pyo3(signature = (test_fraction, seed=0, stratify=true))]
    fn split(&self, test_fraction: f64, seed: u64, stratify: bool) -> PyResult<(Self, Self)> {
        let (train, test) =
            data::split(&self.inner, test_fraction, seed, stratify).map_err(to_py)?;
        Ok((Self { inner: train }, Self { inner: test }))
    }

    /// Standardizes `self` and, optionally, `other` with `self`'s statistics.
    #[pyo3(signature = (other=None))]
    fn standardize(&self, other: Option<&PyDataset>) -> PyResult<(Self, Option<Self>)> {
        let (train, transform) = data::standardize(&self.inner).map_err(to_py)?;
        let other = other
            .map(|o| transform.apply(&o.inner).map(|inner| Self { inner }))
            .transpose()
            .map_err(to_py)?;
        Ok((Self { inner: train }, other))
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, p={})", self.inner.n(), self.inner.p())
    }
}

fn solver_config(
    max_iters: usize,
    grad_tol: f64,
    seed: u64,
    start_from_utilitarian: bool,
) -> PyResult<SolverConfig> {
    let config = SolverConfig {
        max_iters,
        grad_tol,
        seed,
        start_from_utilitarian,
        ..Default::default()
    };
    config.validate().map_err(to_py)?;
    Ok(config)
}

fn report_dict<'py>(py: Python<'py>, report: &SolveReport) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("theta", report.theta_hat.as_slice().to_vec())?;
    out.set_item("objective", report.objective)?;
    out.set_item("grad_norm", report.grad_norm)?;
    out.set_item("iterations", report.iterations)?;
    out.set_item("converged", report.converged)?;
    out.set_item("diverged", report.diverged)?;
    Ok(out)
}

fn record_dict<'py>(py: Python<'py>, record: &FrontierRecord) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("lambda", record.lambda)?;
    out.set_item("model_id", &record.model_id)?;
    out.set_item("split", record.split.to_string())?;
    out.set_item("avg_individual_loss", record.avg_individual_loss)?;
    out.set_item("max_individual_loss", record.max_individual_loss)?;
    out.set_item("avg_group_loss", record.avg_group_loss)?;
    out.set_item("max_group_loss", record.max_group_loss)?;
    out.set_item("gamma_hat", record.gamma_hat)?;
    out.set_item("converged", record.converged)?;
    let groups = PyDict::new(py);
    for g in &record.group_avg_losses {
        groups.set_item(&g.name, g.avg_loss)?;
    }
    out.set_item("group_avg_losses", groups)?;
    Ok(out)
}

/// Minimizes the tilted objective by gradient descent with backtracking.
#[pyfunction]
#[pyo3(signature = (spec, dataset, lam, init=None, max_iters=20_000, grad_tol=1e-8))]
fn minimize<'py>(
    py: Python<'py>,
    spec: &PyModelSpec,
    dataset: &PyDataset,
    lam: f64,
    init: Option<Vec<f64>>,
    max_iters: usize,
    grad_tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = solver_config(max_iters, grad_tol, 0, false)?;
    let init = match init {
        Some(v) => ParamVector::new(v).map_err(to_py)?,
        None => spec.inner.zero_params(),
    };
    let report = py
        .detach(|| {
            solver::minimize(
                &spec.inner,
                &dataset.inner,
                TiltParam::new(lam)?,
                &config,
                &init,
            )
        })
        .map_err(to_py)?;
    report_dict(py, &report)
}

/// Warm-started solves over an ascending tilt grid.
#[pyfunction]
#[pyo3(signature = (spec, dataset, grid, max_iters=20_000, grad_tol=1e-8, seed=0, start_from_utilitarian=false))]
#[allow(clippy::too_many_arguments)]
fn sweep<'py>(
    py: Python<'py>,
    spec: &PyModelSpec,
    dataset: &PyDataset,
    grid: Vec<f64>,
    max_iters: usize,
    grad_tol: f64,
    seed: u64,
    start_from_utilitarian: bool,
) -> PyResult<Bound<'py, PyList>> {
    let config = solver_config(max_iters, grad_tol, seed, start_from_utilitarian)?;
    let reports = py
        .detach(|| solver::sweep(&spec.inner, &dataset.inner, &grid, &config))
        .map_err(to_py)?;
    let out = PyList::empty(py);
    for r in &reports {
        out.append(report_dict(py, r)?)?;
    }
    Ok(out)
}

/// Average and worst-case losses of every minimizer along the grid, on the
/// training split and the optional held-out split.
#[pyfunction]
#[pyo3(signature = (spec, train, grid, test=None, group_names=None, max_iters=20_000, grad_tol=1e-8, seed=0, start_from_utilitarian=false))]
#[allow(clippy::too_many_arguments)]
fn build_frontier<'py>(
    py: Python<'py>,
    spec: &PyModelSpec,
    train: &PyDataset,
    grid: Vec<f64>,
    test: Option<&PyDataset>,
    group_names: Option<Vec<String>>,
    max_iters: usize,
    grad_tol: f64,
    seed: u64,
    start_from_utilitarian: bool,
) -> PyResult<Bound<'py, PyList>> {
    let config = solver_config(max_iters, grad_tol, seed, start_from_utilitarian)?;
    let test = test.map(|t| &t.inner);
    let records = py
        .detach(|| {
            frontier::build_frontier(
                &spec.inner,
                &train.inner,
                test,
                group_names.as_deref(),
                &grid,
                &config,
            )
        })
        .map_err(to_py)?;
    let out = PyList::empty(py);
    for r in &records {
        out.append(record_dict(py, r)?)?;
    }
    Ok(out)
}

/// Runs the named numerical checks (all when `names` is empty).
#[pyfunction]
#[pyo3(signature = (names=Vec::new()))]
fn run_checks<'py>(py: Python<'py>, names: Vec<String>) -> PyResult<Bound<'py, PyList>> {
    let reports = py.detach(|| verify::run_checks(&names)).map_err(to_py)?;
    let out = PyList::empty(py);
    for r in &reports {
        let d = PyDict::new(py);
        d.set_item("check_id", &r.check_id)?;
        d.set_item("passed", r.passed)?;
        d.set_item(
            "status",
            match r.status {
                verify::CheckStatus::Pass => "pass",
                verify::CheckStatus::Fail => "fail",
                verify::CheckStatus::Inconclusive => "inconclusive",
            },
        )?;
        d.set_item("measured", r.measured.clone())?;
        d.set_item("threshold", r.threshold.clone())?;
        d.set_item("details", &r.details)?;
        out.append(d)?;
    }
    Ok(out)
}

#[pyfunction]
fn check_names() -> Vec<&'static str> {
    verify::CHECK_NAMES.to_vec()
}

#[pymodule(name = "tilt_frontier")]
fn tilt_frontier_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", tilt_frontier::VERSION)?;
    m.add_class::<PyModelSpec>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(tilted_value, m)?)?;
    m.add_function(wrap_pyfunction!(tilt_weights, m)?)?;
    m.add_function(wrap_pyfunction!(group_tilted_value, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(penalized_value, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_step_size, m)?)?;
    m.add_function(wrap_pyfunction!(geometric_grid, m)?)?;
    m.add_function(wrap_pyfunction!(minimize, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(build_frontier, m)?)?;
    m.add_function(wrap_pyfunction!(run_checks, m)?)?;
    m.add_function(wrap_pyfunction!(check_names, m)?)?;
    Ok(())
}
