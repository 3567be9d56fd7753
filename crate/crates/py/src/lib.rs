//! Python bindings for the `treeperc` core crate.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ::treeperc as core;
use core::coupling::{self, SlabConfig};
use core::critical::{self, CurvePoint, DEFAULT_QC_TOL};
use core::percolation;
use core::spectral::NonnegOperator;
use core::stats::Estimate;
use core::window;
use core::{EdgeOracle, Error, PercParams, Window};

create_exception!(treeperc, TreepercError, PyException);
create_exception!(treeperc, CapExceededError, TreepercError);
create_exception!(treeperc, NonConvergenceError, TreepercError);

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::InvalidParameter(_) | Error::Domain(_) | Error::OutOfSlab(_) => PyValueError::new_err(msg),
        Error::CapExceeded { .. } => CapExceededError::new_err(msg),
        Error::NonConvergence { .. } => NonConvergenceError::new_err(msg),
        Error::Inconsistent(_) | Error::Infeasible(_) => TreepercError::new_err(msg),
    }
}

trait OrPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> OrPy<T> for core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn tree(d: u32, k: u32) -> PyResult<core::TreeParams> {
    core::TreeParams::new(d, k).py_err()
}

fn perc(p: f64, q: f64) -> PyResult<PercParams> {
    PercParams::new(p, q).py_err()
}

fn curve_point<'py>(py: Python<'py>, c: &CurvePoint) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("p", c.p)?;
    out.set_item("qc", c.q_c)?;
    out.set_item("lower_bound", c.lower_bound)?;
    out.set_item("gap", c.gap)?;
    out.set_item("rho_residual", c.rho_residual)?;
    out.set_item("bisection_width", c.bisection_width)?;
    Ok(out)
}

fn estimate<'py>(py: Python<'py>, e: &Estimate) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("mean", e.mean)?;
    out.set_item("se", e.se)?;
    out.set_item("n", e.n)?;
    Ok(out)
}

/// Tree shape `T_{d,k}`.
#[pyclass(name = "TreeParams", frozen)]
struct PyTreeParams(core::TreeParams);

#[pymethods]
impl PyTreeParams {
    #[new]
    fn new(d: u32, k: u32) -> PyResult<Self> {
        Ok(Self(tree(d, k)?))
    }

    #[getter]
    fn d(&self) -> u32 {
        self.0.d()
    }

    #[getter]
    fn k(&self) -> u32 {
        self.0.k()
    }

    #[getter]
    fn window_slots(&self) -> u32 {
        self.0.window_slots()
    }

    #[getter]
    fn long_fanout(&self) -> u64 {
        self.0.long_fanout()
    }

    fn lower_bound(&self, p: f64) -> f64 {
        critical::lower_bound(p, self.0)
    }

    fn __repr__(&self) -> String {
        format!("TreeParams(d={}, k={})", self.0.d(), self.0.k())
    }
}

/// Perron root of the window mean matrix for a fixed tree, warm-started
/// across calls.
#[pyclass(name = "RhoSolver")]
struct PyRhoSolver(critical::RhoSolver);

#[pymethods]
impl PyRhoSolver {
    #[new]
    fn new(d: u32, k: u32) -> PyResult<Self> {
        Ok(Self(critical::RhoSolver::new(tree(d, k)?).py_err()?))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.space().dim()
    }

    fn rho(&mut self, py: Python<'_>, p: f64, q: f64) -> PyResult<f64> {
        py.detach(|| self.0.rho(p, q)).py_err()
    }

    /// Returns `rho`, left/right eigenvectors `mu`, `nu` (index = window − 1),
    /// the residual and the iteration count.
    fn solve<'py>(&mut self, py: Python<'py>, p: f64, q: f64) -> PyResult<Bound<'py, PyDict>> {
        let pp = perc(p, q)?;
        let r = py.detach(|| self.0.solve(pp)).py_err()?;
        let out = PyDict::new(py);
        out.set_item("rho", r.rho)?;
        out.set_item("mu", r.mu)?;
        out.set_item("nu", r.nu)?;
        out.set_item("residual", r.residual)?;
        out.set_item("iterations", r.iterations)?;
        Ok(out)
    }

    #[pyo3(signature = (p, tol = DEFAULT_QC_TOL))]
    fn qc<'py>(&mut self, py: Python<'py>, p: f64, tol: f64) -> PyResult<Bound<'py, PyDict>> {
        let c = py.detach(|| self.0.qc(p, tol)).py_err()?;
        curve_point(py, &c)
    }
}

#[pyfunction]
#[pyo3(signature = (d, k, p, tol = DEFAULT_QC_TOL))]
fn qc<'py>(py: Python<'py>, d: u32, k: u32, p: f64, tol: f64) -> PyResult<Bound<'py, PyDict>> {
    let params = tree(d, k)?;
    let c = py.detach(|| critical::qc(p, params, tol)).py_err()?;
    curve_point(py, &c)
}

#[pyfunction]
fn rho(py: Python<'_>, d: u32, k: u32, p: f64, q: f64) -> PyResult<f64> {
    let params = tree(d, k)?;
    py.detach(|| critical::rho(p, q, params)).py_err()
}

#[pyfunction]
#[pyo3(signature = (d, k, grid, tol = DEFAULT_QC_TOL))]
fn qc_sweep<'py>(py: Python<'py>, d: u32, k: u32, grid: Vec<f64>, tol: f64) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let params = tree(d, k)?;
    let sweep = py.detach(|| critical::qc_sweep(&grid, params, tol)).py_err()?;
    sweep.points.iter().map(|c| curve_point(py, c)).collect()
}

/// Rows `(k, qc, s_k, s_star, residual)`.
#[pyfunction]
#[pyo3(signature = (p, d, k_min, k_max, tol = 1e-12))]
fn asymptotics_table(
    py: Python<'_>,
    p: f64,
    d: u32,
    k_min: u32,
    k_max: u32,
    tol: f64,
) -> PyResult<Vec<(u32, f64, f64, f64, f64)>> {
    let rows = py.detach(|| critical::asymptotics_table(p, d, k_min..=k_max, tol)).py_err()?;
    Ok(rows.iter().map(|r| (r.k, r.q_c, r.s_k, r.s_star, r.residual)).collect())
}

#[pyfunction]
#[pyo3(signature = (d, k, p, q, trials, depth, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn estimate_survival<'py>(
    py: Python<'py>,
    d: u32,
    k: u32,
    p: f64,
    q: f64,
    trials: u64,
    depth: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let (params, pp) = (tree(d, k)?, perc(p, q)?);
    let e = py.detach(|| percolation::estimate_survival(params, pp, trials, depth, seed)).py_err()?;
    estimate(py, &e)
}

/// Per-trial layer counts `X_0..X_{n_max}`.
#[pyfunction]
#[pyo3(signature = (d, k, p, q, trials, n_max, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn sample_layers(
    py: Python<'_>,
    d: u32,
    k: u32,
    p: f64,
    q: f64,
    trials: u64,
    n_max: usize,
    seed: u64,
) -> PyResult<Vec<Vec<u64>>> {
    let (params, pp) = (tree(d, k)?, perc(p, q)?);
    let runs = py.detach(|| percolation::sample_layers(params, pp, trials, n_max, seed)).py_err()?;
    Ok(runs.into_iter().map(|s| s.x).collect())
}

/// Window-chain layer counts `X_0..X_generations` for one run.
#[pyfunction]
#[pyo3(signature = (d, k, p, q, generations, seed = 0, trial = 0))]
#[allow(clippy::too_many_arguments)]
fn simulate_window_chain(
    d: u32,
    k: u32,
    p: f64,
    q: f64,
    generations: usize,
    seed: u64,
    trial: u64,
) -> PyResult<Vec<u64>> {
    let law = window::WindowLaw::new(tree(d, k)?, perc(p, q)?).py_err()?;
    let mut rng = core::oracle::trial_rng(seed, trial);
    let run = window::simulate_window_chain(&law, &mut rng, generations, window::ChainStart::Initial).py_err()?;
    Ok(run.x)
}

/// Nonzero entries `(row_window, col_window, rate)` of the window mean matrix.
#[pyfunction]
fn mean_matrix(d: u32, k: u32, p: f64, q: f64) -> PyResult<Vec<(u64, u64, f64)>> {
    let m = window::build_m(tree(d, k)?, perc(p, q)?).py_err()?;
    let dim = m.csr().dim();
    let mut out = Vec::new();
    for a in 1..=dim as u64 {
        out.extend(m.row(Window(a)).map(|(b, v)| (a, b.0, v)));
    }
    Ok(out)
}

/// Mass of each nonempty window in the initial distribution, keyed by bitmask.
#[pyfunction]
fn initial_window_dist(d: u32, k: u32, p: f64) -> PyResult<Vec<(u64, f64)>> {
    let pmf = window::initial_window_dist(tree(d, k)?, p).py_err()?;
    Ok(pmf.masses.iter().map(|(w, m)| (w.0, *m)).collect())
}

#[pyfunction]
fn exact_mbar(d: u32, k: u32, p: f64, q: f64, window: u64) -> PyResult<f64> {
    percolation::exact_mbar(Window(window), perc(p, q)?, tree(d, k)?).py_err()
}

#[pyfunction]
fn s_star(p: f64, d: u32) -> PyResult<f64> {
    percolation::s_star(p, d).py_err()
}

#[pyfunction]
#[pyo3(signature = (d, k, p, s, trials, seed = 0))]
fn criteria_eval<'py>(
    py: Python<'py>,
    d: u32,
    k: u32,
    p: f64,
    s: f64,
    trials: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let params = tree(d, k)?;
    let e = py.detach(|| percolation::criteria_eval(params, p, s, trials, seed)).py_err()?;
    let out = PyDict::new(py);
    out.set_item("p", e.p)?;
    out.set_item("s", e.s)?;
    out.set_item("q", e.q)?;
    out.set_item("lhs_a", estimate(py, &e.lhs_a)?)?;
    out.set_item("lhs_b", estimate(py, &e.lhs_b)?)?;
    Ok(out)
}

/// `(Z, Ẑ)` on one random slab configuration, or on the distinguished
/// configuration when `omega_bar` is set.
#[pyfunction]
#[pyo3(signature = (d, k, p, q, seed = 0, trial = 0, omega_bar = false))]
#[allow(clippy::too_many_arguments)]
fn pathwise_pair(d: u32, k: u32, p: f64, q: f64, seed: u64, trial: u64, omega_bar: bool) -> PyResult<(u64, u64)> {
    let params = tree(d, k)?;
    let config = if omega_bar {
        SlabConfig::OmegaBar
    } else {
        SlabConfig::random(EdgeOracle::for_trial(seed, trial), perc(p, q)?)
    };
    coupling::pathwise_pair(params, &config).py_err()
}

/// Joint table with marginals `p1`, `p2`, supported on the diagonal and the
/// row and column of `x_bar`.
#[pyfunction]
fn finite_coupling(p1: Vec<f64>, p2: Vec<f64>, x_bar: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(coupling::finite_coupling(&p1, &p2, x_bar).py_err()?.joint)
}

#[pyfunction]
#[pyo3(signature = (d, k, p, q, delta, trials, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn dominance_test<'py>(
    py: Python<'py>,
    d: u32,
    k: u32,
    p: f64,
    q: f64,
    delta: f64,
    trials: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let params = tree(d, k)?;
    let rep = py.detach(|| coupling::dominance_test(params, p, q, delta, trials, seed)).py_err()?;
    let out = PyDict::new(py);
    let rows: Vec<(u64, f64, f64, f64, f64, f64)> = rep
        .rows
        .iter()
        .map(|r| (r.threshold, r.surv_z, r.se_z, r.surv_zhat, r.se_zhat, r.violation_sigma))
        .collect();
    out.set_item("rows", rows)?;
    out.set_item("max_violation_sigma", rep.max_violation_sigma)?;
    out.set_item("dominated", rep.dominated)?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (d, k, p, q, n, m, trials, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn conditioned_cluster_sample<'py>(
    py: Python<'py>,
    d: u32,
    k: u32,
    p: f64,
    q: f64,
    n: u64,
    m: usize,
    trials: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let (params, pp) = (tree(d, k)?, perc(p, q)?);
    let s = py
        .detach(|| core::mtbp::conditioned_cluster_sample(params, pp, n, m, trials, seed))
        .py_err()?;
    let out = PyDict::new(py);
    out.set_item("attempted", s.attempted)?;
    out.set_item("accepted", s.accepted)?;
    out.set_item("acceptance_rate", s.acceptance_rate)?;
    out.set_item("counts", s.counts)?;
    Ok(out)
}

#[pymodule]
#[pyo3(name = "treeperc")]
fn treeperc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("TreepercError", py.get_type::<TreepercError>())?;
    m.add("CapExceededError", py.get_type::<CapExceededError>())?;
    m.add("NonConvergenceError", py.get_type::<NonConvergenceError>())?;
    m.add_class::<PyTreeParams>()?;
    m.add_class::<PyRhoSolver>()?;
    m.add_function(wrap_pyfunction!(qc, m)?)?;
    m.add_function(wrap_pyfunction!(rho, m)?)?;
    m.add_function(wrap_pyfunction!(qc_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotics_table, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_survival, m)?)?;
    m.add_function(wrap_pyfunction!(sample_layers, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_window_chain, m)?)?;
    m.add_function(wrap_pyfunction!(mean_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(initial_window_dist, m)?)?;
    m.add_function(wrap_pyfunction!(exact_mbar, m)?)?;
    m.add_function(wrap_pyfunction!(s_star, m)?)?;
    m.add_function(wrap_pyfunction!(criteria_eval, m)?)?;
    m.add_function(wrap_pyfunction!(pathwise_pair, m)?)?;
    m.add_function(wrap_pyfunction!(finite_coupling, m)?)?;
    m.add_function(wrap_pyfunction!(dominance_test, m)?)?;
    m.add_function(wrap_pyfunction!(conditioned_cluster_sample, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
