//! Python bindings: `import riskgrad`.
//!
//! Samples cross the boundary as a list of rows (`list[list[float]]`) or a
//! flat list of scalars for one-dimensional payoffs.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use riskgrad::riskmeasure::estimate_evar as core_estimate_evar;
use riskgrad::{
    oracles, Error, GaussianSpec, ObjectiveConfig, SampleMode, SampleSet, SgldConfig, StepSpec,
};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(_) | Error::Csv(_) => PyIOError::new_err(err.to_string()),
        Error::Divergence { .. } | Error::Infeasible(_) => PyRuntimeError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

/// Rows of samples from either a flat scalar list or a list of rows.
#[derive(FromPyObject)]
enum Samples {
    Rows(Vec<Vec<f64>>),
    Scalars(Vec<f64>),
}

impl Samples {
    fn into_set(self) -> riskgrad::Result<SampleSet> {
        match self {
            Samples::Rows(rows) => SampleSet::from_rows(&rows),
            Samples::Scalars(xs) => SampleSet::from_scalars(&xs),
        }
    }
}

fn rows_of(set: &SampleSet) -> Vec<Vec<f64>> {
    set.rows().map(|r| r.to_vec()).collect()
}

/// Payoff family `f(r, s)`: `identity`, `linear` or `softmax`.
#[pyclass(name = "PayoffModel", module = "riskgrad", frozen, from_py_object)]
#[derive(Clone)]
struct PyPayoffModel {
    inner: riskgrad::PayoffModel,
}

#[pymethods]
impl PyPayoffModel {
    #[new]
    #[pyo3(signature = (kind = "identity", dim = 1))]
    fn new(kind: &str, dim: usize) -> PyResult<Self> {
        let kind = kind.parse().map_err(to_py)?;
        let inner = riskgrad::PayoffModel::new(kind, dim).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn identity() -> Self {
        Self {
            inner: riskgrad::PayoffModel::identity(),
        }
    }

    #[staticmethod]
    fn linear(dim: usize) -> PyResult<Self> {
        Ok(Self {
            inner: riskgrad::PayoffModel::linear(dim).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn softmax(dim: usize) -> PyResult<Self> {
        Ok(Self {
            inner: riskgrad::PayoffModel::softmax(dim).map_err(to_py)?,
        })
    }

    #[getter]
    fn kind(&self) -> String {
        format!("{:?}", self.inner.kind()).to_lowercase()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn portfolio_dim(&self) -> usize {
        self.inner.portfolio_dim()
    }

    fn evaluate(&self, r: Vec<f64>, s: Vec<f64>) -> PyResult<f64> {
        self.inner.evaluate(&r, &s).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("PayoffModel(kind='{}', dim={})", self.kind(), self.dim())
    }
}

/// Result of an AVaR ensemble run.
#[pyclass(name = "Estimate", module = "riskgrad", frozen, get_all)]
struct PyEstimate {
    avar: f64,
    var: f64,
    var_std: f64,
    loss_std: f64,
    portfolio: Vec<f64>,
    portfolio_std: Vec<f64>,
    per_chain_losses: Vec<f64>,
    /// `(step, avar, var, loss_std)` per recorded step.
    path: Vec<(usize, f64, f64, f64)>,
    step_size: f64,
    implied_horizon: f64,
    assumption_flags: Vec<String>,
    warnings: Vec<String>,
}

#[pymethods]
impl PyEstimate {
    fn __repr__(&self) -> String {
        format!(
            "Estimate(avar={}, var={}, loss_std={})",
            self.avar, self.var, self.loss_std
        )
    }
}

/// Result of the risk-level measure search.
#[pyclass(name = "EvarResult", module = "riskgrad", frozen, get_all)]
struct PyEvarResult {
    value: f64,
    best_candidate: usize,
    best_penalty: f64,
    candidates: usize,
    feasible_candidates: usize,
    levels_estimated: usize,
    delta: f64,
    /// `(count, min, max, mean)` of the winning atoms.
    best_atoms: (usize, f64, f64, f64),
}

#[pymethods]
impl PyEvarResult {
    fn __repr__(&self) -> String {
        format!(
            "EvarResult(value={}, feasible={}/{})",
            self.value, self.feasible_candidates, self.candidates
        )
    }
}

#[allow(clippy::too_many_arguments)]
fn configs(
    samples: Samples,
    u: f64,
    lam: f64,
    gamma: f64,
    step_size: Option<f64>,
    horizon: Option<f64>,
    steps: usize,
    chains: usize,
    seed: u64,
    penalty: &str,
    minibatch: Option<usize>,
    record_stride: Option<usize>,
) -> PyResult<(SgldConfig, ObjectiveConfig)> {
    let step = match (step_size, horizon) {
        (Some(_), Some(_)) => {
            return Err(PyValueError::new_err(
                "give at most one of step_size and horizon",
            ))
        }
        (_, Some(t)) => StepSpec::Horizon(t),
        (h, None) => StepSpec::Size(h.unwrap_or(1e-4)),
    };
    let mut sgld = SgldConfig::new(lam, step, steps, chains, seed);
    if let Some(s) = record_stride {
        sgld = sgld.with_record_stride(s);
    }
    let mut objective = ObjectiveConfig::new(u, gamma, samples.into_set().map_err(to_py)?)
        .with_penalty(penalty.parse().map_err(to_py)?);
    if let Some(size) = minibatch {
        objective = objective.with_sample_mode(SampleMode::Minibatch { size });
    }
    Ok((sgld, objective))
}

/// Optimized AVaR, VaR and portfolio from an ensemble of SGLD chains.
#[pyfunction]
#[pyo3(signature = (
    samples, u = 0.95, *, payoff = None, lam = 1e8, gamma = 1e-8, step_size = None,
    horizon = None, steps = 10_000, chains = 500, seed = 0, penalty = "full",
    minibatch = None, record_stride = None,
))]
#[allow(clippy::too_many_arguments)]
fn estimate_avar(
    py: Python<'_>,
    samples: Samples,
    u: f64,
    payoff: Option<PyPayoffModel>,
    lam: f64,
    gamma: f64,
    step_size: Option<f64>,
    horizon: Option<f64>,
    steps: usize,
    chains: usize,
    seed: u64,
    penalty: &str,
    minibatch: Option<usize>,
    record_stride: Option<usize>,
) -> PyResult<PyEstimate> {
    let model = payoff
        .map(|p| p.inner)
        .unwrap_or_else(riskgrad::PayoffModel::identity);
    let (sgld, objective) = configs(
        samples,
        u,
        lam,
        gamma,
        step_size,
        horizon,
        steps,
        chains,
        seed,
        penalty,
        minibatch,
        record_stride,
    )?;
    let report = py
        .detach(|| riskgrad::estimate_avar(&sgld, &model, &objective))
        .map_err(to_py)?;
    Ok(PyEstimate {
        avar: report.avar,
        var: report.var,
        var_std: report.var_std,
        loss_std: report.loss_std(),
        portfolio: report.portfolio,
        portfolio_std: report.portfolio_std,
        per_chain_losses: report.per_chain_losses,
        path: report
            .path
            .iter()
            .map(|p| (p.step, p.avar, p.var, p.loss_std))
            .collect(),
        step_size: report.config.step_size,
        implied_horizon: report.config.implied_horizon,
        assumption_flags: report.assumption_flags,
        warnings: report.warnings,
    })
}

/// Entropic VaR through a random search over discrete risk-level measures.
#[pyfunction]
#[pyo3(signature = (
    samples, u = 0.95, *, payoff = None, lam = 1e8, gamma = 1e-8, step_size = None,
    horizon = None, steps = 10_000, chains = 500, seed = 0, penalty = "full",
    atoms = 5000, partitions = 5000, q_order = None, k = None, delta = None,
    force_atom = None, level_grid = None, search_seed = None,
))]
#[allow(clippy::too_many_arguments)]
fn estimate_evar(
    py: Python<'_>,
    samples: Samples,
    u: f64,
    payoff: Option<PyPayoffModel>,
    lam: f64,
    gamma: f64,
    step_size: Option<f64>,
    horizon: Option<f64>,
    steps: usize,
    chains: usize,
    seed: u64,
    penalty: &str,
    atoms: usize,
    partitions: usize,
    q_order: Option<f64>,
    k: Option<f64>,
    delta: Option<f64>,
    force_atom: Option<f64>,
    level_grid: Option<u32>,
    search_seed: Option<u64>,
) -> PyResult<PyEvarResult> {
    let model = payoff
        .map(|p| p.inner)
        .unwrap_or_else(riskgrad::PayoffModel::identity);
    let (sgld, objective) = configs(
        samples, u, lam, gamma, step_size, horizon, steps, chains, seed, penalty, None, None,
    )?;
    let mut cfg = riskgrad::EvarConfig::new(u);
    cfg.atoms = atoms;
    cfg.partitions = partitions;
    cfg.seed = search_seed.unwrap_or(seed);
    cfg.force_atom = force_atom;
    if let Some(q) = q_order {
        cfg.q_order = q;
    }
    if let Some(k) = k {
        cfg.k_multiplier = k;
    }
    if let Some(d) = delta {
        cfg.delta = d;
    }
    if let Some(g) = level_grid {
        cfg.level_grid = g;
    }
    let r = py
        .detach(|| core_estimate_evar(&cfg, &sgld, &model, &objective))
        .map_err(to_py)?;
    Ok(PyEvarResult {
        value: r.value,
        best_candidate: r.best_candidate,
        best_penalty: r.best_penalty,
        candidates: r.candidates,
        feasible_candidates: r.feasible_candidates,
        levels_estimated: r.levels_estimated,
        delta: r.delta,
        best_atoms: (
            r.best_atoms.count,
            r.best_atoms.min,
            r.best_atoms.max,
            r.best_atoms.mean,
        ),
    })
}

/// Constant `Psi(M, t, u, lambda)` of the deviation inequality.
#[pyfunction]
#[pyo3(signature = (steps, horizon, u, lam))]
fn psi_constant(steps: usize, horizon: f64, u: f64, lam: f64) -> PyResult<f64> {
    riskgrad::psi_constant(steps, horizon, u, lam).map_err(to_py)
}

/// `min(1, 2 exp(-epsilon^2 N / psi))`.
#[pyfunction]
fn deviation_probability_bound(epsilon: f64, chains: usize, psi: f64) -> PyResult<f64> {
    riskgrad::deviation_probability_bound(epsilon, chains, psi).map_err(to_py)
}

fn spec(mu: f64, sigma: f64) -> PyResult<GaussianSpec> {
    GaussianSpec::new(mu, sigma).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (u, mu = 0.0, sigma = 1.0))]
fn gaussian_avar(u: f64, mu: f64, sigma: f64) -> PyResult<f64> {
    oracles::gaussian_avar(spec(mu, sigma)?, u).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (u, mu = 0.0, sigma = 1.0))]
fn gaussian_var(u: f64, mu: f64, sigma: f64) -> PyResult<f64> {
    oracles::gaussian_var(spec(mu, sigma)?, u).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (u, mu = 0.0, sigma = 1.0))]
fn gaussian_evar(u: f64, mu: f64, sigma: f64) -> PyResult<f64> {
    oracles::gaussian_evar_entropic(spec(mu, sigma)?, u).map_err(to_py)
}

/// Reference EVaR of N(1, 2) used to score EVaR runs.
#[pyfunction]
fn gaussian_evar_reference(u: f64) -> PyResult<f64> {
    oracles::gaussian_evar_reference(u).map_err(to_py)
}

/// Exact AVaR of the empirical distribution of `samples`.
#[pyfunction]
fn empirical_avar(samples: Vec<f64>, u: f64) -> PyResult<f64> {
    oracles::empirical_avar(&samples, u).map_err(to_py)
}

/// `samples` draws of a Gaussian vector with marginals `[(mu, sigma), ...]`.
#[pyfunction]
#[pyo3(signature = (marginals, samples, seed = 0, correlation = None))]
fn gaussian_sampler(
    marginals: Vec<(f64, f64)>,
    samples: usize,
    seed: u64,
    correlation: Option<Vec<Vec<f64>>>,
) -> PyResult<Vec<Vec<f64>>> {
    let specs = marginals
        .into_iter()
        .map(|(m, s)| spec(m, s))
        .collect::<PyResult<Vec<_>>>()?;
    let set =
        riskgrad::gaussian_sampler(&specs, correlation.as_deref(), samples, seed).map_err(to_py)?;
    Ok(rows_of(&set))
}

/// A loaded price table.
#[pyclass(name = "PriceTable", module = "riskgrad", frozen)]
struct PyPriceTable {
    inner: riskgrad::PriceTable,
}

#[pymethods]
impl PyPriceTable {
    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names().to_vec()
    }

    #[getter]
    fn timestamps(&self) -> Vec<String> {
        self.inner.timestamps().to_vec()
    }

    #[getter]
    fn columns(&self) -> Vec<Vec<f64>> {
        self.inner.columns().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.n_rows()
    }

    /// Row-wise simple differences `x[t+1] - x[t]`.
    fn increments(&self) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows_of(
            &riskgrad::to_increments(&self.inner).map_err(to_py)?,
        ))
    }
}

/// Reads a price CSV; `na` is `"drop"` (drop gappy columns) or `"error"`.
#[pyfunction]
#[pyo3(signature = (path, delimiter = ",", na = "drop", header = true, timestamps = true))]
fn load_csv(
    path: &str,
    delimiter: &str,
    na: &str,
    header: bool,
    timestamps: bool,
) -> PyResult<PyPriceTable> {
    let delimiter = match delimiter.as_bytes() {
        [b] => *b,
        _ => {
            return Err(PyValueError::new_err(
                "delimiter must be a single ASCII character",
            ))
        }
    };
    let na_policy = match na {
        "drop" => riskgrad::NaPolicy::DropColumn,
        "error" => riskgrad::NaPolicy::Error,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown na policy `{other}`"
            )))
        }
    };
    let options = riskgrad::CsvOptions {
        delimiter,
        header,
        timestamps,
        na_policy,
    };
    let inner = riskgrad::load_csv(path, &options).map_err(to_py)?;
    Ok(PyPriceTable { inner })
}

#[pymodule(name = "riskgrad")]
fn riskgrad_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyPayoffModel>()?;
    m.add_class::<PyEstimate>()?;
    m.add_class::<PyEvarResult>()?;
    m.add_class::<PyPriceTable>()?;
    m.add_function(wrap_pyfunction!(estimate_avar, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_evar, m)?)?;
    m.add_function(wrap_pyfunction!(psi_constant, m)?)?;
    m.add_function(wrap_pyfunction!(deviation_probability_bound, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_avar, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_var, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_evar, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_evar_reference, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_avar, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_sampler, m)?)?;
    m.add_function(wrap_pyfunction!(load_csv, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_and_row_samples_agree() {
        let a = Samples::Scalars(vec![1.0, 2.0, 3.0]).into_set().unwrap();
        let b = Samples::Rows(vec![vec![1.0], vec![2.0], vec![3.0]])
            .into_set()
            .unwrap();
        assert_eq!(a.as_flat(), b.as_flat());
        assert_eq!(rows_of(&a), vec![vec![1.0], vec![2.0], vec![3.0]]);
    }

    #[test]
    fn errors_map_to_python_exception_types() {
        Python::initialize();
        Python::attach(|py| {
            assert!(to_py(Error::EmptyTable).is_instance_of::<PyValueError>(py));
            assert!(to_py(Error::Infeasible(1.0)).is_instance_of::<PyRuntimeError>(py));
            let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
            assert!(to_py(Error::Io(io)).is_instance_of::<PyIOError>(py));
        });
    }

    #[test]
    fn step_size_and_horizon_are_exclusive() {
        let r = configs(
            Samples::Scalars(vec![0.0]),
            0.9,
            1.0,
            0.0,
            Some(1e-3),
            Some(1.0),
            10,
            1,
            0,
            "full",
            None,
            None,
        );
        assert!(r.is_err());
    }
}
