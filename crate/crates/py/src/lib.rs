//! Python bindings: `import pyorthoplex`.

use orthoplex::optimizer::feature_collapse_metrics;
use orthoplex::{self as core, DimensionTuple, EntropyKind, HardmaxConvention};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(pyorthoplex, OrthoplexError, PyValueError);

fn err(e: core::Error) -> PyErr {
    OrthoplexError::new_err(format!("{}: {e}", e.code()))
}

fn tuple(parts: Vec<usize>) -> PyResult<DimensionTuple> {
    DimensionTuple::new(parts).map_err(err)
}

/// Unit vectors `x_1..x_n` in `R^d`.
#[pyclass(name = "SphericalConfig", module = "pyorthoplex", from_py_object)]
#[derive(Clone)]
struct PyConfig(core::SphericalConfig);

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (rows, normalize = false))]
    fn new(rows: Vec<Vec<f64>>, normalize: bool) -> PyResult<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let x = if normalize {
            core::SphericalConfig::normalized(d, rows)
        } else {
            core::SphericalConfig::new(d, rows)
        };
        x.map(PyConfig).map_err(err)
    }

    #[getter]
    fn d(&self) -> usize {
        self.0.d()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.0.to_rows()
    }

    fn gram(&self) -> Vec<Vec<f64>> {
        self.0.gram()
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("config serializes")
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(PyConfig).map_err(|e| OrthoplexError::new_err(e.to_string()))
    }

    fn __len__(&self) -> usize {
        self.0.n()
    }

    fn __repr__(&self) -> String {
        format!("SphericalConfig(d={}, n={})", self.0.d(), self.0.n())
    }
}

/// Class weights with `m` unit features per class.
#[pyclass(name = "FeatureSet", module = "pyorthoplex", from_py_object)]
#[derive(Clone)]
struct PyFeatures(core::FeatureSet);

#[pymethods]
impl PyFeatures {
    /// `features[k][i]` is the `i`-th feature of class `k`.
    #[new]
    fn new(weights: PyConfig, features: Vec<Vec<Vec<f64>>>) -> PyResult<Self> {
        let m = features.first().map_or(0, Vec::len);
        let flat = features.into_iter().flatten().flatten().collect();
        core::FeatureSet::new(weights.0, m, flat).map(PyFeatures).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (weights, m = 1))]
    fn self_dual(weights: PyConfig, m: usize) -> PyResult<Self> {
        core::FeatureSet::self_dual(weights.0, m).map(PyFeatures).map_err(err)
    }

    #[staticmethod]
    fn random(d: usize, n: usize, m: usize, seed: u64) -> PyResult<Self> {
        core::FeatureSet::random(d, n, m, seed).map(PyFeatures).map_err(err)
    }

    #[getter]
    fn weights(&self) -> PyConfig {
        PyConfig(self.0.weights().clone())
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m()
    }

    fn features(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.0.n())
            .map(|k| (0..self.0.m()).map(|i| self.0.feature(k, i).to_vec()).collect())
            .collect()
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("feature set serializes")
    }

    fn __repr__(&self) -> String {
        format!("FeatureSet(d={}, n={}, m={})", self.0.d(), self.0.n(), self.0.m())
    }
}

#[pyfunction]
fn build_simplex(q: usize, d: usize) -> PyResult<PyConfig> {
    core::build_simplex(q, d).map(PyConfig).map_err(err)
}

#[pyfunction]
fn build_orthoplex(d: usize, n: usize) -> PyResult<PyConfig> {
    core::build_orthoplex_subset(d, n).map(PyConfig).map_err(err)
}

/// Returns `(config, tuple)` for `kind` in `{"low", "high"}`.
#[pyfunction]
#[pyo3(signature = (d, n, kind = "low"))]
fn build_entropy(d: usize, n: usize, kind: &str) -> PyResult<(PyConfig, Vec<usize>)> {
    let kind: EntropyKind = kind.parse().map_err(err)?;
    let (x, t) = core::build_entropy_code(d, n, kind).map_err(err)?;
    Ok((PyConfig(x), t.parts().to_vec()))
}

#[pyfunction]
fn build_block(parts: Vec<usize>) -> PyResult<PyConfig> {
    core::build_block_code(&tuple(parts)?).map(PyConfig).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (d, n, seed = 0))]
fn random_config(d: usize, n: usize, seed: u64) -> PyResult<PyConfig> {
    core::random_config(d, n, seed).map(PyConfig).map_err(err)
}

#[pyfunction]
fn coherence(x: &PyConfig) -> PyResult<f64> {
    core::coherence(&x.0).map_err(err)
}

/// `(margin, per-point distances)`.
#[pyfunction]
fn margin(x: &PyConfig) -> PyResult<(f64, Vec<f64>)> {
    let m = core::margin(&x.0).map_err(err)?;
    Ok((m.margin, m.distances))
}

#[pyfunction]
fn hull_distance<'py>(py: Python<'py>, query: Vec<f64>, generators: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let r = core::hull_distance(&query, &generators).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("distance", r.distance)?;
    out.set_item("witness_point", r.witness_point)?;
    out.set_item("weights", r.weights)?;
    out.set_item("gap", r.gap)?;
    Ok(out)
}

#[pyfunction]
fn radon_partition<'py>(py: Python<'py>, x: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let r = core::radon_partition(&x.0).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("side_a", r.side_a)?;
    out.set_item("side_b", r.side_b)?;
    out.set_item("radon_point", r.radon_point)?;
    out.set_item("lambda", r.lambda)?;
    Ok(out)
}

/// `(softmax_rattlers, tammes_rattlers)`.
#[pyfunction]
fn find_rattlers(x: &PyConfig) -> PyResult<(Vec<usize>, Vec<usize>)> {
    let r = core::find_rattlers(&x.0).map_err(err)?;
    Ok((r.softmax, r.tammes))
}

#[pyfunction]
fn orthoplex_decompose<'py>(py: Python<'py>, x: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let r = core::orthoplex_decompose(&x.0).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("s0", r.s0)?;
    out.set_item("batches", r.batches)?;
    out.set_item("ranks", r.ranks)?;
    Ok(out)
}

#[pyfunction]
fn ce_loss(fs: &PyFeatures, tau: f64) -> PyResult<f64> {
    core::ce_loss(&fs.0, tau).map_err(err)
}

#[pyfunction]
fn ce_selfdual_closed(parts: Vec<usize>, n: usize, tau: f64) -> PyResult<f64> {
    core::ce_selfdual_closed(&tuple(parts)?, n, tau).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (fs, convention = "negated"))]
fn hardmax_loss(fs: &PyFeatures, convention: &str) -> PyResult<f64> {
    let c: HardmaxConvention = convention.parse().map_err(err)?;
    core::hardmax_loss(&fs.0, c).map_err(err)
}

#[pyfunction]
fn l_tau_c(x: &PyConfig, tau: f64, c: f64) -> PyResult<f64> {
    core::l_tau_c(&x.0, tau, c).map_err(err)
}

/// `(riemannian_weights, riemannian_features)`, flattened row-major.
#[pyfunction]
fn ce_gradient(fs: &PyFeatures, tau: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let g = core::ce_gradient(&fs.0, tau).map_err(err)?;
    Ok((g.riemannian_weights, g.riemannian_features))
}

#[pyfunction]
fn f_eval(n: usize, tau: f64, x: f64) -> PyResult<f64> {
    core::f_eval(n, tau, x).map_err(err)
}

#[pyfunction]
fn f_d1(n: usize, tau: f64, x: f64) -> PyResult<f64> {
    core::f_d1(n, tau, x).map_err(err)
}

#[pyfunction]
fn f_d2(n: usize, tau: f64, x: f64) -> PyResult<f64> {
    core::f_d2(n, tau, x).map_err(err)
}

#[pyfunction]
fn enumerate_tuples(d: usize, l: usize) -> PyResult<Vec<Vec<usize>>> {
    let ts = core::enumerate_tuples(d, l).map_err(err)?;
    Ok(ts.iter().map(|t| t.parts().to_vec()).collect())
}

/// `(tuple, loss)`.
#[pyfunction]
fn optimal_tuple(d: usize, n: usize, tau: f64) -> PyResult<(Vec<usize>, f64)> {
    let (t, v) = core::optimal_tuple(d, n, tau).map_err(err)?;
    Ok((t.parts().to_vec(), v))
}

/// Threshold report as a JSON string, plus the CSV table.
#[pyfunction]
#[pyo3(signature = (d, n, tau_lo, tau_hi, tol = 1e-5))]
fn crossover_scan(d: usize, n: usize, tau_lo: f64, tau_hi: f64, tol: f64) -> PyResult<(String, String)> {
    let r = core::crossover_scan(d, n, tau_lo, tau_hi, tol).map_err(err)?;
    Ok((r.threshold_json().to_string(), r.to_csv()))
}

/// `(concavity, convexity)` thresholds of `f_{n,τ}`.
#[pyfunction]
#[pyo3(signature = (n, tol = 1e-5))]
fn thresholds(n: usize, tol: f64) -> PyResult<(f64, f64)> {
    let conc = core::concavity_threshold(n, tol).map_err(err)?;
    let conv = core::convexity_threshold(n, tol).map_err(err)?;
    Ok((conc, conv))
}

#[pyfunction]
#[pyo3(signature = (d, n, m, tau, seed = 0, max_iters = 10_000, grad_tol = 1e-14))]
#[allow(clippy::too_many_arguments)]
fn optimize<'py>(
    py: Python<'py>,
    d: usize,
    n: usize,
    m: usize,
    tau: f64,
    seed: u64,
    max_iters: usize,
    grad_tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let init = core::FeatureSet::random(d, n, m, seed).map_err(err)?;
    let mut opts = core::OptimizeOptions::new(tau);
    opts.max_iters = max_iters;
    opts.grad_tol = grad_tol;
    let st = py.detach(|| core::optimize(init, &opts)).map_err(err)?;
    let reference = DimensionTuple::low_entropy(d, n).map_err(err)?;
    let metrics = feature_collapse_metrics(&st.iterate, &reference).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("loss", st.loss)?;
    out.set_item("grad_norm", st.grad_norm)?;
    out.set_item("iterations", st.step)?;
    out.set_item("duality_gap", metrics.duality_gap)?;
    out.set_item("gram_error_low", metrics.gram_error_low)?;
    out.set_item("gram_error_high", metrics.gram_error_high)?;
    out.set_item("features", PyFeatures(st.iterate).into_pyobject(py)?)?;
    Ok(out)
}

#[pymodule]
pub fn pyorthoplex(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("OrthoplexError", m.py().get_type::<OrthoplexError>())?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyFeatures>()?;
    m.add_function(wrap_pyfunction!(build_simplex, m)?)?;
    m.add_function(wrap_pyfunction!(build_orthoplex, m)?)?;
    m.add_function(wrap_pyfunction!(build_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(build_block, m)?)?;
    m.add_function(wrap_pyfunction!(random_config, m)?)?;
    m.add_function(wrap_pyfunction!(coherence, m)?)?;
    m.add_function(wrap_pyfunction!(margin, m)?)?;
    m.add_function(wrap_pyfunction!(hull_distance, m)?)?;
    m.add_function(wrap_pyfunction!(radon_partition, m)?)?;
    m.add_function(wrap_pyfunction!(find_rattlers, m)?)?;
    m.add_function(wrap_pyfunction!(orthoplex_decompose, m)?)?;
    m.add_function(wrap_pyfunction!(ce_loss, m)?)?;
    m.add_function(wrap_pyfunction!(ce_selfdual_closed, m)?)?;
    m.add_function(wrap_pyfunction!(hardmax_loss, m)?)?;
    m.add_function(wrap_pyfunction!(l_tau_c, m)?)?;
    m.add_function(wrap_pyfunction!(ce_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(f_eval, m)?)?;
    m.add_function(wrap_pyfunction!(f_d1, m)?)?;
    m.add_function(wrap_pyfunction!(f_d2, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_tuples, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_tuple, m)?)?;
    m.add_function(wrap_pyfunction!(crossover_scan, m)?)?;
    m.add_function(wrap_pyfunction!(thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    Ok(())
}
