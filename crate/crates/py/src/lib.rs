//! Python bindings for the safe Bayesian optimization toolkit.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use safebo_core::acquisition::{self, MiQuery};
use safebo_core::benchmarks::{self, BenchmarkProblem};
use safebo_core::gp::{Channel, ExtendedKernel, ExtendedPoint, GaussianPosterior, KernelSpec, NoiseModel};
use safebo_core::harness::{self, RunConfig};
use safebo_core::theory;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn channel(name: &str) -> PyResult<Channel> {
    match name {
        "objective" | "f" => Ok(Channel::Objective),
        "constraint" | "s" => Ok(Channel::Constraint),
        other => Err(PyValueError::new_err(format!("unknown channel {other:?}"))),
    }
}

/// Two-channel GP posterior (objective and constraint) with an isotropic RBF kernel.
#[pyclass(name = "GaussianPosterior")]
struct PyPosterior {
    inner: GaussianPosterior,
}

#[pymethods]
impl PyPosterior {
    #[new]
    #[pyo3(signature = (dim, lengthscale, outputscale, noise_var, shared = true))]
    fn new(dim: usize, lengthscale: f64, outputscale: f64, noise_var: f64, shared: bool) -> PyResult<Self> {
        let spec = KernelSpec::isotropic(dim, lengthscale, outputscale);
        let kernel = if shared { ExtendedKernel::shared(spec) } else { ExtendedKernel::independent(spec.clone(), spec) };
        let noise = NoiseModel::homoskedastic(noise_var);
        let inner = GaussianPosterior::new(kernel, noise.clone(), noise).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Condition on `y` observed at `x` on channel "objective" or "constraint".
    fn observe(&mut self, x: Vec<f64>, channel_name: &str, y: f64) -> PyResult<()> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!("expected {} coordinates, got {}", self.inner.dim(), x.len())));
        }
        self.inner.observe(ExtendedPoint::new(x, channel(channel_name)?), y).map_err(value_err)
    }

    /// Posterior mean and variance.
    fn predict(&self, x: Vec<f64>, channel_name: &str) -> PyResult<(f64, f64)> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!("expected {} coordinates, got {}", self.inner.dim(), x.len())));
        }
        Ok(self.inner.mean_var_at(channel(channel_name)?, &x))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// A benchmark problem from the registry.
#[pyclass(name = "Benchmark")]
struct PyBenchmark {
    inner: BenchmarkProblem,
}

#[pymethods]
impl PyBenchmark {
    #[new]
    #[pyo3(signature = (name, seed = 0))]
    fn new(name: &str, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: benchmarks::by_name(name, seed).map_err(value_err)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.inner.domain.lower.clone(), self.inner.domain.upper.clone())
    }

    #[getter]
    fn x0(&self) -> Vec<f64> {
        self.inner.x0.clone()
    }

    #[getter]
    fn fstar(&self) -> f64 {
        self.inner.fstar
    }

    fn objective(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.objective(&x).map_err(value_err)
    }

    fn constraint(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.constraint(&x).map_err(value_err)
    }
}

#[pyfunction]
fn benchmark_names() -> Vec<&'static str> {
    benchmarks::NAMES.to_vec()
}

#[pyfunction]
fn exact_entropy(mu: f64, sigma: f64) -> PyResult<f64> {
    acquisition::exact_entropy(mu, sigma).map_err(value_err)
}

#[pyfunction]
fn approx_entropy(mu: f64, sigma: f64) -> PyResult<f64> {
    acquisition::approx_entropy(mu, sigma).map_err(value_err)
}

/// Expected approximate entropy at `z` after one noisy measurement at `x`.
#[pyfunction]
fn expected_post_entropy(mu_z: f64, sigma_z: f64, sigma_x: f64, rho: f64, noise_var: f64) -> PyResult<f64> {
    acquisition::expected_post_entropy(&MiQuery { mu_z, sigma_z, sigma_x, rho, noise_var }).map_err(value_err)
}

#[pyfunction]
fn ise_upper_bound(var_x: f64, noise_var: f64) -> f64 {
    acquisition::ise_upper_bound(var_x, noise_var)
}

#[pyfunction]
fn alpha_mes(mu: f64, sigma: f64, ystar: f64) -> f64 {
    acquisition::alpha_mes(mu, sigma, ystar)
}

#[pyfunction]
fn eta(x: f64, m: f64, noise_var: f64) -> f64 {
    theory::eta(x, m, noise_var)
}

/// Run a campaign from a JSON run configuration and return the summary as a JSON string.
#[pyfunction]
fn run_campaign(config_json: &str) -> PyResult<String> {
    let config = RunConfig::from_json(config_json).map_err(value_err)?;
    let campaign = harness::run_campaign(&config).map_err(value_err)?;
    let summary = harness::CampaignSummary::new(&campaign).map_err(value_err)?;
    serde_json::to_string(&summary).map_err(value_err)
}

#[pymodule]
fn safebo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPosterior>()?;
    m.add_class::<PyBenchmark>()?;
    m.add_function(wrap_pyfunction!(benchmark_names, m)?)?;
    m.add_function(wrap_pyfunction!(exact_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(approx_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(expected_post_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(ise_upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_mes, m)?)?;
    m.add_function(wrap_pyfunction!(eta, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    Ok(())
}
