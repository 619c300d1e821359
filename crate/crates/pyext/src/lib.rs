//! Python bindings: the main types and operations of marginlab.
//!
//! Build the cdylib and drop it next to your script as `marginlab_py.so`
//! (see python/smoke_test.py for the exact recipe).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use marginlab::harness::config::ExperimentConfig;
use marginlab::harness::trial;
use marginlab::linear_margin as lm;
use marginlab::opt_chain as oc;
use marginlab::synthdata as sd;
use marginlab::xor_net as xn;

fn err(e: marginlab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct LinearSpec {
    inner: sd::LinearSpec,
}

#[pymethods]
impl LinearSpec {
    /// Axis-aligned spec (`mu = e_1`) with explicit noise scale.
    #[new]
    fn new(d: usize, sigma: f64, n: usize) -> PyResult<Self> {
        Ok(LinearSpec { inner: sd::LinearSpec::canonical(d, sigma, n).map_err(err)? })
    }

    /// Axis-aligned spec with `sigma` derived from `kappa = n/(d sigma^2)`.
    #[staticmethod]
    fn from_kappa(d: usize, kappa: f64, n: usize) -> PyResult<Self> {
        Ok(LinearSpec { inner: sd::LinearSpec::from_kappa(d, kappa, n).map_err(err)? })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa()
    }
}

#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct XorSpec {
    inner: sd::XorSpec,
}

#[pymethods]
impl XorSpec {
    #[new]
    fn new(d: usize, sigma: f64, n: usize, h: f64, m: usize) -> PyResult<Self> {
        Ok(XorSpec { inner: sd::XorSpec::canonical(d, sigma, n, h, m).map_err(err)? })
    }

    #[staticmethod]
    fn from_kappa(d: usize, kappa: f64, n: usize, h: f64, m: usize) -> PyResult<Self> {
        Ok(XorSpec { inner: sd::XorSpec::from_kappa(d, kappa, n, h, m).map_err(err)? })
    }

    /// The distribution with the two ground-truth roles exchanged.
    fn swapped(&self) -> XorSpec {
        XorSpec { inner: self.inner.swapped() }
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }
}

#[pyclass(frozen)]
struct Dataset {
    inner: sd::Dataset,
}

#[pymethods]
impl Dataset {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y.to_vec()
    }

    /// Column `j` of the design matrix.
    fn x_column(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= self.inner.n() {
            return Err(PyValueError::new_err("column out of range"));
        }
        Ok(self.inner.x.column(j).to_vec())
    }

    /// Sizes of the four XOR clusters (mu1, -mu1, mu2, -mu2), if present.
    fn cluster_sizes(&self) -> Option<(usize, usize, usize, usize)> {
        self.inner.clusters.as_ref().map(|c| {
            (c.mu1.len(), c.minus_mu1.len(), c.mu2.len(), c.minus_mu2.len())
        })
    }
}

#[pyclass(frozen)]
struct LinearModel {
    inner: lm::LinearModel,
}

#[pymethods]
impl LinearModel {
    #[new]
    fn new(weights: Vec<f64>) -> PyResult<Self> {
        Ok(LinearModel { inner: lm::LinearModel::new(weights.into()).map_err(err)? })
    }

    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }
}

#[pyclass(frozen)]
struct TwoLayerNet {
    inner: xn::TwoLayerNet,
}

#[pymethods]
impl TwoLayerNet {
    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    fn row(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.m() {
            return Err(PyValueError::new_err("row out of range"));
        }
        Ok(self.inner.w.row(i).to_vec())
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.d() {
            return Err(PyValueError::new_err("dimension mismatch"));
        }
        Ok(xn::forward(&self.inner, ndarray::Array1::from(x).view()))
    }
}

#[pyfunction]
fn sample_linear(spec: &LinearSpec, seed: u64) -> PyResult<Dataset> {
    Ok(Dataset { inner: sd::sample_linear(&spec.inner, seed).map_err(err)? })
}

#[pyfunction]
fn sample_xor(spec: &XorSpec, seed: u64) -> PyResult<Dataset> {
    Ok(Dataset { inner: sd::sample_xor(&spec.inner, seed).map_err(err)? })
}

#[pyfunction]
fn opposite_linear(ds: &Dataset, spec: &LinearSpec, variant: &str) -> PyResult<Dataset> {
    let v = match variant {
        "psi" => sd::OppositeVariant::Psi,
        "psi_bar" => sd::OppositeVariant::PsiBar,
        other => return Err(PyValueError::new_err(format!("unknown variant {other}"))),
    };
    Ok(Dataset { inner: sd::opposite_linear(&ds.inner, &spec.inner, v).map_err(err)? })
}

#[pyfunction]
fn opposite_xor(ds: &Dataset, spec: &XorSpec) -> PyResult<Dataset> {
    Ok(Dataset { inner: sd::opposite_xor(&ds.inner, &spec.inner).map_err(err)? })
}

fn margin_dict<'py>(py: Python<'py>, r: &lm::MarginReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("per_sample", r.per_sample.clone())?;
    d.set_item("min_margin", r.min_margin)?;
    d.set_item("normalized_margin", r.normalized_margin)?;
    d.set_item("max_margin_estimate", r.max_margin_estimate)?;
    d.set_item("optimality_ratio", r.optimality_ratio)?;
    d.set_item("zero_norm", r.zero_norm)?;
    Ok(d)
}

/// Hard-margin solve; returns `(model, report_dict)` with the certified
/// `gamma*(S)` inside the report.
#[pyfunction]
fn solve_max_margin<'py>(
    py: Python<'py>,
    ds: &Dataset,
) -> PyResult<(LinearModel, Bound<'py, PyDict>)> {
    let sol = lm::solve_max_margin(&ds.inner).map_err(err)?;
    let report = margin_dict(py, &sol.report)?;
    report.set_item("duality_gap", sol.gap)?;
    report.set_item("epochs", sol.epochs)?;
    Ok((LinearModel { inner: sol.model }, report))
}

#[pyfunction]
fn linear_margin_report<'py>(
    py: Python<'py>,
    model: &LinearModel,
    ds: &Dataset,
) -> PyResult<Bound<'py, PyDict>> {
    margin_dict(py, &lm::margin_report(&model.inner, &ds.inner))
}

#[pyfunction]
fn construct_good(spec: &LinearSpec) -> PyResult<LinearModel> {
    Ok(LinearModel { inner: lm::construct_good(&spec.inner).map_err(err)? })
}

#[pyfunction]
fn construct_bad(ds: &Dataset, spec: &LinearSpec) -> PyResult<LinearModel> {
    Ok(LinearModel { inner: lm::construct_bad(&ds.inner, &spec.inner).map_err(err)? })
}

#[pyfunction]
fn construct_mixture(
    alpha: f64,
    beta: f64,
    good: &LinearModel,
    bad: &LinearModel,
) -> PyResult<LinearModel> {
    Ok(LinearModel {
        inner: lm::construct_mixture(alpha, beta, &good.inner, &bad.inner).map_err(err)?,
    })
}

#[pyfunction]
fn optimal_mixture(gamma_g: f64, gamma_b: f64) -> PyResult<(f64, f64, f64)> {
    lm::optimal_mixture(gamma_g, gamma_b).map_err(err)
}

/// Monte-Carlo and analytic test error of a linear model:
/// `(empirical, bound)`.
#[pyfunction]
fn linear_test_error(
    model: &LinearModel,
    spec: &LinearSpec,
    mc_samples: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let te = lm::test_error(&model.inner, &spec.inner, mc_samples, seed).map_err(err)?;
    Ok((te.empirical, te.analytic_bound))
}

#[pyfunction]
fn kappa_gen_xor(h: f64) -> PyResult<f64> {
    oc::kappa_gen_xor(h).map_err(err)
}

#[pyfunction]
fn gamma_0(kappa: f64, h: f64) -> f64 {
    oc::gamma_0(kappa, h)
}

#[pyfunction]
fn gamma_star(kappa: f64, h: f64) -> f64 {
    oc::gamma_star(kappa, h)
}

fn trivariate_dict<'py>(py: Python<'py>, pt: &oc::TrivariatePoint) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("b", pt.b)?;
    d.set_item("c", pt.c)?;
    d.set_item("d", pt.d)?;
    d.set_item("k", pt.k)?;
    d.set_item("p5", pt.p5)?;
    d.set_item("objective", pt.objective)?;
    d.set_item("boundary", pt.boundary)?;
    Ok(d)
}

#[pyfunction]
fn solve_opt5<'py>(py: Python<'py>, k: f64, p5: f64, h: f64) -> PyResult<Bound<'py, PyDict>> {
    trivariate_dict(py, &oc::solve_opt5(k, p5, h).map_err(err)?)
}

#[pyfunction]
fn opt5_oracle<'py>(
    py: Python<'py>,
    k: f64,
    p5: f64,
    h: f64,
    grid: usize,
) -> PyResult<Bound<'py, PyDict>> {
    trivariate_dict(py, &oc::opt5_oracle(k, p5, h, grid).map_err(err)?)
}

#[pyfunction]
fn construct_signal_net(spec: &XorSpec) -> PyResult<TwoLayerNet> {
    Ok(TwoLayerNet { inner: xn::construct_signal_net(&spec.inner).map_err(err)? })
}

/// Builds the chained construction; `mode` is "optimal", "no_gen" or
/// "scaled" (the latter shrinks the signal coordinate by `alpha`).
#[pyfunction]
#[pyo3(signature = (ds, spec, mode, alpha = 0.5))]
fn construct_network(ds: &Dataset, spec: &XorSpec, mode: &str, alpha: f64) -> PyResult<TwoLayerNet> {
    let mode = match mode {
        "optimal" => oc::ConstructMode::Optimal,
        "no_gen" => oc::ConstructMode::NoGen,
        "scaled" => oc::ConstructMode::Scaled(alpha),
        other => return Err(PyValueError::new_err(format!("unknown mode {other}"))),
    };
    Ok(TwoLayerNet { inner: oc::construct_network(&ds.inner, &spec.inner, mode).map_err(err)? })
}

#[pyfunction]
fn xor_margin_report<'py>(
    py: Python<'py>,
    net: &TwoLayerNet,
    ds: &Dataset,
) -> PyResult<Bound<'py, PyDict>> {
    margin_dict(py, &xn::normalized_margin(&net.inner, &ds.inner))
}

/// Soft-min margin ascent on the sphere; returns `(net, report_dict)`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (ds, spec, max_steps = 4000, restarts = 3, seed = 0, reference_margin = None, epsilon = 0.05))]
fn train_max_margin<'py>(
    py: Python<'py>,
    ds: &Dataset,
    spec: &XorSpec,
    max_steps: usize,
    restarts: usize,
    seed: u64,
    reference_margin: Option<f64>,
    epsilon: f64,
) -> PyResult<(TwoLayerNet, Bound<'py, PyDict>)> {
    let opts = xn::TrainOpts {
        max_steps,
        restarts,
        seed,
        reference_margin,
        epsilon,
        ..xn::TrainOpts::default()
    };
    let out = xn::train_max_margin(&ds.inner, &spec.inner, &opts).map_err(err)?;
    let report = margin_dict(py, &out.report)?;
    report.set_item("target_reached", out.trace.target_reached)?;
    report.set_item("best_restart", out.trace.best_restart)?;
    report.set_item("steps_traced", out.trace.rows.len())?;
    Ok((TwoLayerNet { inner: out.net }, report))
}

#[pyfunction]
fn xor_test_error(net: &TwoLayerNet, spec: &XorSpec, mc_samples: usize, seed: u64) -> PyResult<f64> {
    xn::xor_test_error(&net.inner, &spec.inner, mc_samples, seed).map_err(err)
}

#[pyfunction]
fn opposite_margin_audit<'py>(
    py: Python<'py>,
    net: &TwoLayerNet,
    ds: &Dataset,
    spec: &XorSpec,
    mc_samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let audit =
        oc::opposite_margin_audit(&net.inner, &ds.inner, &spec.inner, mc_samples, seed).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("margin_s", audit.margin_s)?;
    d.set_item("margin_psi_s", audit.margin_psi_s)?;
    d.set_item("margin_ratio", audit.margin_ratio.defined())?;
    d.set_item("err_psi_s", audit.err_psi_s)?;
    d.set_item("err_psi_d", audit.err_psi_d)?;
    Ok(d)
}

/// Runs one harness trial from a JSON experiment config; returns the trial
/// record as a JSON string.
#[pyfunction]
fn run_trial_json(config_json: &str, seed: u64) -> PyResult<String> {
    let cfg: ExperimentConfig =
        ExperimentConfig::from_json(config_json).map_err(err)?;
    let record = trial::run_trial(&cfg, seed);
    serde_json::to_string(&record).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn marginlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<LinearSpec>()?;
    m.add_class::<XorSpec>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<LinearModel>()?;
    m.add_class::<TwoLayerNet>()?;
    m.add_function(wrap_pyfunction!(sample_linear, m)?)?;
    m.add_function(wrap_pyfunction!(sample_xor, m)?)?;
    m.add_function(wrap_pyfunction!(opposite_linear, m)?)?;
    m.add_function(wrap_pyfunction!(opposite_xor, m)?)?;
    m.add_function(wrap_pyfunction!(solve_max_margin, m)?)?;
    m.add_function(wrap_pyfunction!(linear_margin_report, m)?)?;
    m.add_function(wrap_pyfunction!(construct_good, m)?)?;
    m.add_function(wrap_pyfunction!(construct_bad, m)?)?;
    m.add_function(wrap_pyfunction!(construct_mixture, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_mixture, m)?)?;
    m.add_function(wrap_pyfunction!(linear_test_error, m)?)?;
    m.add_function(wrap_pyfunction!(kappa_gen_xor, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_0, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_star, m)?)?;
    m.add_function(wrap_pyfunction!(solve_opt5, m)?)?;
    m.add_function(wrap_pyfunction!(opt5_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(construct_signal_net, m)?)?;
    m.add_function(wrap_pyfunction!(construct_network, m)?)?;
    m.add_function(wrap_pyfunction!(xor_margin_report, m)?)?;
    m.add_function(wrap_pyfunction!(train_max_margin, m)?)?;
    m.add_function(wrap_pyfunction!(xor_test_error, m)?)?;
    m.add_function(wrap_pyfunction!(opposite_margin_audit, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial_json, m)?)?;
    m.add("KAPPA_GEN_LINEAR", oc::KAPPA_GEN_LINEAR)?;
    m.add("KAPPA_UC_LINEAR", oc::KAPPA_UC_LINEAR)?;
    m.add("KAPPA_UC_XOR", oc::KAPPA_UC_XOR)?;
    Ok(())
}
