//! Python bindings for the `coulomb-gas` crate.

use coulomb_gas::calibration::{self, ModelParams};
use coulomb_gas::harness::{self, ExperimentConfig};
use coulomb_gas::{oracle, theory, Error, TiltedSpacingDist};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "ModelParams", frozen, eq, from_py_object)]
#[derive(Clone, PartialEq)]
struct PyModelParams {
    inner: ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    fn new(n: usize, beta: f64, force: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ModelParams::new(n, beta, force).map_err(py_err)?,
        })
    }

    /// Parameters with force `f0 * beta * n`.
    #[staticmethod]
    fn linear(n: usize, beta: f64, f0: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ModelParams::linear(n, beta, f0).map_err(py_err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn force(&self) -> f64 {
        self.inner.force
    }

    #[getter]
    fn f0(&self) -> f64 {
        self.inner.f0()
    }

    fn __repr__(&self) -> String {
        format!("ModelParams(n={}, beta={}, force={})", self.inner.n, self.inner.beta, self.inner.force)
    }
}

#[pyclass(name = "TiltedSpacingDist", frozen)]
struct PyTiltedSpacingDist {
    inner: TiltedSpacingDist,
}

#[pymethods]
impl PyTiltedSpacingDist {
    #[new]
    fn new(beta: f64, theta: f64) -> PyResult<Self> {
        Ok(Self {
            inner: TiltedSpacingDist::new(beta, theta).map_err(py_err)?,
        })
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta()
    }

    fn mode(&self) -> f64 {
        self.inner.mode()
    }

    fn mean(&self) -> PyResult<f64> {
        self.inner.mean_exact().map_err(py_err)
    }

    fn variance(&self) -> PyResult<f64> {
        self.inner.var_exact().map_err(py_err)
    }

    fn cdf(&self, x: f64) -> PyResult<f64> {
        self.inner.cdf(x).map_err(py_err)
    }

    fn quantile(&self, u: f64) -> PyResult<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(PyValueError::new_err("quantile level must lie in [0, 1]"));
        }
        Ok(self.inner.quantile(u))
    }

    #[pyo3(signature = (size, seed = 0))]
    fn sample(&self, py: Python<'_>, size: usize, seed: u64) -> Vec<f64> {
        py.detach(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..size).map(|_| self.inner.sample(&mut rng)).collect()
        })
    }
}

#[pyfunction]
fn solve_lambda<'py>(py: Python<'py>, params: &PyModelParams) -> PyResult<Bound<'py, PyDict>> {
    let cal = py.detach(|| calibration::solve_lambda(&params.inner)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("lambda", cal.lambda)?;
    d.set_item("residual", cal.residual)?;
    d.set_item("iterations", cal.iterations)?;
    d.set_item("sigma2_total", cal.sigma2_total)?;
    d.set_item("lyapunov", cal.lyapunov)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (params, k, growth_hint = None))]
fn predict_spacing<'py>(
    py: Python<'py>,
    params: &PyModelParams,
    k: usize,
    growth_hint: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let p = theory::predict_spacing_auto(&params.inner, k, growth_hint).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("k", p.k)?;
    d.set_item("mean", p.mean)?;
    d.set_item("variance", p.variance)?;
    d.set_item("variance_is_order", p.variance_is_order)?;
    Ok(d)
}

/// `(E[X_k^power | sum = 1], error estimate)` by direct quadrature; small n only.
#[pyfunction]
#[pyo3(signature = (params, k, power = 1))]
fn oracle_moment(py: Python<'_>, params: &PyModelParams, k: usize, power: u32) -> PyResult<(f64, f64)> {
    let r = py
        .detach(|| oracle::conditional_moment_bruteforce(&params.inner, k, power))
        .map_err(py_err)?;
    Ok((r.value, r.error_estimate))
}

/// Runs an experiment from `key = value` config text and returns the JSON report.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::parse(config).map_err(py_err)?;
    py.detach(|| harness::run_experiment(&cfg).and_then(|r| r.to_json()))
        .map_err(py_err)
}

#[pymodule]
fn coulomb_gas_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyTiltedSpacingDist>()?;
    m.add_function(wrap_pyfunction!(solve_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(predict_spacing, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_moment, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
