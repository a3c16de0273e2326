//! Python bindings for the smooth-and-match estimation library: exact OU
//! simulation, kernel density evaluation, the smooth-and-match fit, the
//! baseline estimators and a single Monte Carlo cell runner.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use smatch::baselines::{self, LikelihoodParts};
use smatch::estimator::{fit, BandwidthSelection, FitConfig};
use smatch::harness::{run_cell, EstimatorKind, ExperimentConfig};
use smatch::kde::{DensityEstimate, Kernel, WeightFunction};
use smatch::models::{DriftSpec, OuModel, ParameterInterval};
use smatch::simulate::{sample_euler_maruyama, sample_ou_exact, SeedSpec, TimeSeriesSample};

fn py_err(e: smatch::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Equally spaced observation record.
#[pyclass(name = "Sample", skip_from_py_object)]
struct PySample {
    inner: TimeSeriesSample,
}

#[pymethods]
impl PySample {
    #[new]
    fn new(delta: f64, values: Vec<f64>) -> PyResult<Self> {
        Ok(PySample {
            inner: TimeSeriesSample::new(delta, values).map_err(py_err)?,
        })
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.values().len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Sample(delta={}, n+1={})",
            self.inner.delta(),
            self.inner.values().len()
        )
    }
}

/// Exact OU path via the AR(1) representation; returns n+1 observations.
#[pyfunction]
#[pyo3(signature = (theta, sigma, delta, n, seed, rep = 0))]
fn simulate_ou(
    theta: f64,
    sigma: f64,
    delta: f64,
    n: usize,
    seed: u64,
    rep: u64,
) -> PyResult<PySample> {
    let model = OuModel::new(theta, sigma, delta).map_err(py_err)?;
    let sample = sample_ou_exact(&model, n, SeedSpec::new(seed, rep)).map_err(py_err)?;
    Ok(PySample { inner: sample })
}

/// Euler-Maruyama path of the OU drift (generic drifts stay on the Rust
/// side); returns n+1 observations after the burn-in.
#[pyfunction]
#[pyo3(signature = (theta, sigma, delta, n, seed, rep = 0, substeps = 100, burn_in = 0, x0 = 0.0))]
#[allow(clippy::too_many_arguments)]
fn simulate_ou_euler(
    theta: f64,
    sigma: f64,
    delta: f64,
    n: usize,
    seed: u64,
    rep: u64,
    substeps: usize,
    burn_in: usize,
    x0: f64,
) -> PyResult<PySample> {
    let sample = sample_euler_maruyama(
        &DriftSpec::ou(),
        theta,
        sigma,
        delta,
        substeps,
        n,
        burn_in,
        x0,
        SeedSpec::new(seed, rep),
    )
    .map_err(py_err)?;
    Ok(PySample { inner: sample })
}

/// Smooth-and-match fit; returns (theta_hat, bandwidth, criterion_value).
/// `bandwidth=None` selects the bandwidth by quasi-optimality.
#[pyfunction]
#[pyo3(signature = (sample, sigma, theta_lo = 0.05, theta_hi = 20.0, bandwidth = None))]
fn estimate_sm(
    sample: &PySample,
    sigma: f64,
    theta_lo: f64,
    theta_hi: f64,
    bandwidth: Option<f64>,
) -> PyResult<(f64, f64, f64)> {
    let cfg = FitConfig {
        space: ParameterInterval::new(theta_lo, theta_hi).map_err(py_err)?,
        bandwidth: match bandwidth {
            Some(h) => BandwidthSelection::Fixed(h),
            None => BandwidthSelection::QuasiOptimal,
        },
        ..FitConfig::default()
    };
    let est = fit(
        &sample.inner,
        &DriftSpec::ou(),
        sigma,
        &Kernel::biweight_order4(),
        &WeightFunction::default(),
        &cfg,
    )
    .map_err(py_err)?;
    Ok((
        est.theta_hat,
        est.bandwidth.expect("fit always reports a bandwidth"),
        est.criterion_value,
    ))
}

/// Moment estimator from the stationary second moment.
#[pyfunction]
fn estimate_kessler(sample: &PySample, sigma: f64) -> PyResult<f64> {
    baselines::kessler_estimator(&sample.inner, sigma).map_err(py_err)
}

/// Exact maximum likelihood over [theta_lo, theta_hi].
#[pyfunction]
#[pyo3(signature = (sample, sigma, theta_lo = 0.05, theta_hi = 20.0))]
fn estimate_mle(sample: &PySample, sigma: f64, theta_lo: f64, theta_hi: f64) -> PyResult<f64> {
    let space = ParameterInterval::new(theta_lo, theta_hi).map_err(py_err)?;
    baselines::ou_mle(&sample.inner, sigma, space).map_err(py_err)
}

/// One Newton step on the score from the smooth-and-match preliminary;
/// returns (theta_bar, preliminary).
#[pyfunction]
#[pyo3(signature = (sample, sigma, theta_lo = 0.05, theta_hi = 20.0))]
fn estimate_one_step(
    sample: &PySample,
    sigma: f64,
    theta_lo: f64,
    theta_hi: f64,
) -> PyResult<(f64, f64)> {
    let (preliminary, _, _) = estimate_sm(sample, sigma, theta_lo, theta_hi, None)?;
    let space = ParameterInterval::new(theta_lo, theta_hi).map_err(py_err)?;
    let step = baselines::one_step(
        preliminary,
        &sample.inner,
        sigma,
        &LikelihoodParts::ou_exact(),
        space,
    )
    .map_err(py_err)?;
    Ok((step.theta_bar, preliminary))
}

/// Optimal mean squared error 1 / ((n+1) I_delta(theta)) for the OU
/// transition experiment.
#[pyfunction]
fn efficiency_bound(theta: f64, sigma: f64, delta: f64, n_plus_1: usize) -> f64 {
    baselines::efficiency_bound(theta, sigma, delta, n_plus_1)
}

/// Kernel density estimate of the sample at the given points.
#[pyfunction]
fn kde_eval(sample: &PySample, bandwidth: f64, xs: Vec<f64>) -> PyResult<Vec<f64>> {
    let d = DensityEstimate::new(&sample.inner, bandwidth, Kernel::biweight_order4())
        .map_err(py_err)?;
    Ok(d.eval_many(&xs))
}

/// Derivative of the kernel density estimate at the given points.
#[pyfunction]
fn kde_deriv(sample: &PySample, bandwidth: f64, xs: Vec<f64>) -> PyResult<Vec<f64>> {
    let d = DensityEstimate::new(&sample.inner, bandwidth, Kernel::biweight_order4())
        .map_err(py_err)?;
    Ok(d.deriv_many(&xs))
}

/// `int u^l K(u) du` of the order-4 kernel.
#[pyfunction]
fn kernel_moment(l: u32) -> f64 {
    Kernel::biweight_order4().moment(l)
}

/// Criterion weight function on the support [-1.4, 1.4].
#[pyfunction]
fn weight_eval(x: f64) -> f64 {
    WeightFunction::default().eval(x)
}

/// Run one Monte Carlo cell; returns a dict with per-estimator
/// mean/variance/bias_sq/mse plus the efficiency bound and counts.
#[pyfunction]
#[pyo3(signature = (delta, n, k, seed, theta0 = 2.0, sigma = 1.0))]
fn run_mc_cell<'py>(
    py: Python<'py>,
    delta: f64,
    n: usize,
    k: usize,
    seed: u64,
    theta0: f64,
    sigma: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig {
        theta0,
        sigma,
        deltas: vec![delta],
        ns: vec![n],
        replications: k,
        base_seed: seed,
        ..ExperimentConfig::default()
    };
    let cell = run_cell(&cfg, delta, n).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("delta", cell.delta)?;
    out.set_item("n", cell.n)?;
    out.set_item("eb", cell.eb)?;
    for kind in EstimatorKind::ALL {
        if let Some(s) = cell.summary(kind) {
            let e = PyDict::new(py);
            e.set_item("mean", s.mean)?;
            e.set_item("variance", s.variance)?;
            e.set_item("bias_sq", s.bias_sq)?;
            e.set_item("mse", s.mse)?;
            e.set_item("k", s.included)?;
            e.set_item("excluded", s.excluded)?;
            out.set_item(kind.name(), e)?;
        }
    }
    Ok(out)
}

#[pymodule]
fn smatch_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySample>()?;
    m.add_function(wrap_pyfunction!(simulate_ou, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_ou_euler, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_sm, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_kessler, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_mle, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_one_step, m)?)?;
    m.add_function(wrap_pyfunction!(efficiency_bound, m)?)?;
    m.add_function(wrap_pyfunction!(kde_eval, m)?)?;
    m.add_function(wrap_pyfunction!(kde_deriv, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_moment, m)?)?;
    m.add_function(wrap_pyfunction!(weight_eval, m)?)?;
    m.add_function(wrap_pyfunction!(run_mc_cell, m)?)?;
    Ok(())
}
