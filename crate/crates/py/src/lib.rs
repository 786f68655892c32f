//! Python bindings: `import pycrashnet`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyInt};

use crashnet_core::activation::{Activation, ActivationKind};
use crashnet_core::dataio::{network_from_json, network_to_json};
use crashnet_core::erf::{layer_output_bounds, ErfEstimator};
use crashnet_core::netgen::TopologySpec;
use crashnet_core::network::{CrashPattern, NeuronId};
use crashnet_core::omega::{OmegaConfig, OmegaReport};

fn err(e: crashnet_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Network", module = "pycrashnet", frozen)]
struct PyNetwork {
    inner: crashnet_core::Network,
}

fn pattern(net: &crashnet_core::Network, crashed: Vec<(usize, usize)>) -> PyResult<CrashPattern> {
    CrashPattern::new(net, crashed.into_iter().map(|(l, i)| NeuronId::new(l, i))).map_err(err)
}

#[pymethods]
impl PyNetwork {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: network_from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        network_to_json(&self.inner).map_err(err)
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim
    }

    #[getter]
    fn widths(&self) -> Vec<usize> {
        self.inner.widths()
    }

    #[getter]
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    #[getter]
    fn activation(&self) -> (String, f64) {
        (self.inner.activation.kind().name().to_string(), self.inner.activation.lipschitz())
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.forward(&x).map_err(err)?.output)
    }

    /// `crashed` is a list of `(layer, index)` pairs, both 0-based.
    fn forward_failed(&self, x: Vec<f64>, crashed: Vec<(usize, usize)>) -> PyResult<Vec<f64>> {
        let p = pattern(&self.inner, crashed)?;
        self.inner.forward_failed(&x, &p).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Network(input_dim={}, widths={:?}, outputs={})", self.inner.input_dim, self.inner.widths(), self.inner.output_dim())
    }
}

#[pyfunction]
#[pyo3(signature = (input_dim, widths, output_dim, activation, k, seed))]
fn random_network(input_dim: usize, widths: Vec<usize>, output_dim: usize, activation: &str, k: f64, seed: u64) -> PyResult<PyNetwork> {
    let kind: ActivationKind = activation.parse().map_err(|_| PyValueError::new_err(format!("unknown activation {activation:?}")))?;
    let spec = TopologySpec::new(input_dim, widths, output_dim, Activation::new(kind, k).map_err(err)?).map_err(err)?;
    Ok(PyNetwork { inner: crashnet_core::random_network(&spec, seed).map_err(err)? })
}

#[pyfunction]
fn random_inputs(input_dim: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    crashnet_core::random_inputs(input_dim, m, seed)
}

#[pyfunction]
fn erf_fixed<'py>(py: Python<'py>, net: &PyNetwork, f: Vec<usize>) -> PyResult<Bound<'py, PyDict>> {
    let r = crashnet_core::erf_fixed(&net.inner, &f).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("erf_max", r.erf_max)?;
    d.set_item("erf_av", r.erf_av)?;
    Ok(d)
}

#[pyfunction]
fn erf_total<'py>(py: Python<'py>, net: &PyNetwork, f_total: usize) -> PyResult<Bound<'py, PyDict>> {
    let t = ErfEstimator::new(&net.inner).and_then(|e| e.erf_total(f_total)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("erf_max_worst", t.erf_max_worst)?;
    d.set_item("erf_av_expected", t.erf_av_expected)?;
    d.set_item("worst_allocation", t.worst_allocation)?;
    Ok(d)
}

fn report<'py>(py: Python<'py>, r: &OmegaReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("omega_av", r.omega_av)?;
    d.set_item("omega_mav", r.omega_mav)?;
    d.set_item("omega_max", r.omega_max)?;
    d.set_item("std_dev", r.std_dev)?;
    d.set_item("std_err", r.std_err)?;
    d.set_item("patterns", r.patterns_evaluated)?;
    d.set_item("inputs", r.inputs_evaluated)?;
    d.set_item("mode", r.mode.to_string())?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (net, inputs, f_total, workers = 0, budget = crashnet_core::omega::DEFAULT_BUDGET))]
fn omega_exhaustive<'py>(
    py: Python<'py>,
    net: &PyNetwork,
    inputs: Vec<Vec<f64>>,
    f_total: usize,
    workers: usize,
    budget: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = OmegaConfig::default().with_workers(workers).with_budget(budget);
    let r = py.detach(|| crashnet_core::omega_exhaustive(&net.inner, &inputs, f_total, &cfg)).map_err(err)?;
    report(py, &r)
}

#[pyfunction]
#[pyo3(signature = (net, inputs, f_total, n_samples, seed, workers = 0))]
fn omega_sampled<'py>(
    py: Python<'py>,
    net: &PyNetwork,
    inputs: Vec<Vec<f64>>,
    f_total: usize,
    n_samples: u64,
    seed: u64,
    workers: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = OmegaConfig::default().with_workers(workers);
    let r = py
        .detach(|| crashnet_core::omega_sampled(&net.inner, &inputs, f_total, n_samples, seed, &cfg))
        .map_err(err)?;
    report(py, &r)
}

/// Exact binomial coefficient as a Python int.
#[pyfunction]
fn binomial<'py>(py: Python<'py>, n: u64, k: u64) -> PyResult<Bound<'py, PyAny>> {
    let c = crashnet_core::combinatorics::binomial(n, k).map_err(err)?;
    py.get_type::<PyInt>().call1((c.to_string(),))
}

#[pyfunction]
fn layer_output_bounds_py(net: &PyNetwork) -> PyResult<Vec<f64>> {
    Ok(layer_output_bounds(&net.inner).map_err(err)?.caps)
}

#[pymodule]
pub fn pycrashnet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(random_network, m)?)?;
    m.add_function(wrap_pyfunction!(random_inputs, m)?)?;
    m.add_function(wrap_pyfunction!(erf_fixed, m)?)?;
    m.add_function(wrap_pyfunction!(erf_total, m)?)?;
    m.add_function(wrap_pyfunction!(omega_exhaustive, m)?)?;
    m.add_function(wrap_pyfunction!(omega_sampled, m)?)?;
    m.add_function(wrap_pyfunction!(binomial, m)?)?;
    m.add("layer_output_bounds", wrap_pyfunction!(layer_output_bounds_py, m)?)?;
    Ok(())
}
