//! Python bindings: protocol configuration, receiver statistics, squashing
//! bounds, certified key rates and loss scans.

use std::collections::BTreeMap;

use cowqkd::fock::OccupationVector;
use cowqkd::linalg::CMatrix;
use cowqkd::scan::{self as core_scan, ScanSpec};
use cowqkd::security::{self, ErrorRateMode};
use cowqkd::squashing::SQUASHED_OUTCOMES;
use cowqkd::{Basis, Error, Outcome, Variant};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidConfig(_)
        | Error::DimensionMismatch { .. }
        | Error::NotUnitary { .. }
        | Error::NoPhotons
        | Error::Json(_)
        | Error::InsufficientPoints(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn basis_name(b: Basis) -> &'static str {
    match b {
        Basis::Z => "Z",
        Basis::X => "X",
    }
}

fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Zero => "zero",
        Outcome::One => "one",
        Outcome::NoClick => "no_click",
        Outcome::Inconclusive => "inconclusive",
        Outcome::Double => "double",
    }
}

fn to_matrix(rows: Vec<Vec<Complex64>>) -> PyResult<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn from_matrix(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

#[pyclass(name = "ProtocolConfig", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: cowqkd::ProtocolConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (alpha, beta, eta, variant = "three", e_z = 0.0, e_x = 0.0, probs = None))]
    fn new(
        alpha: f64,
        beta: f64,
        eta: f64,
        variant: &str,
        e_z: f64,
        e_x: f64,
        probs: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let variant: Variant = variant.parse().map_err(py_err)?;
        let mut inner = cowqkd::ProtocolConfig::new(alpha, beta, eta, variant).with_noise(e_z, e_x);
        if let Some(p) = probs {
            inner = inner.with_probs(p);
        }
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }

    #[getter]
    fn e_z(&self) -> f64 {
        self.inner.e_z
    }

    #[getter]
    fn e_x(&self) -> f64 {
        self.inner.e_x
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.inner.probs.clone()
    }

    #[getter]
    fn variant(&self) -> &'static str {
        match self.inner.variant {
            Variant::ThreeState => "three",
            Variant::FourStateVacuum => "four",
        }
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "ProtocolConfig(alpha={}, beta={}, eta={}, variant='{}', e_z={}, e_x={}, probs={:?})",
            c.alpha,
            c.beta,
            c.eta,
            self.variant(),
            c.e_z,
            c.e_x,
            c.probs
        )
    }
}

#[pyclass(name = "KeyRate", frozen, get_all)]
struct PyKeyRate {
    e_phase: f64,
    e_z: f64,
    p_det_z: f64,
    key_rate: f64,
    raw_rate: f64,
    gap: f64,
    primal_residual: f64,
}

#[pymethods]
impl PyKeyRate {
    fn __repr__(&self) -> String {
        format!(
            "KeyRate(key_rate={:e}, e_phase={}, e_z={}, p_det_z={:e}, gap={:e})",
            self.key_rate, self.e_phase, self.e_z, self.p_det_z, self.gap
        )
    }
}

#[pyclass(name = "ScanRow", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyScanRow {
    loss_db: f64,
    eta: f64,
    alpha: f64,
    beta: f64,
    e_phase: f64,
    e_z: f64,
    p_det_z: f64,
    key_rate: f64,
    plob: f64,
    gap: f64,
    status: String,
}

impl From<core_scan::ScanRow> for PyScanRow {
    fn from(r: core_scan::ScanRow) -> Self {
        Self {
            loss_db: r.loss_db,
            eta: r.eta,
            alpha: r.alpha,
            beta: r.beta,
            e_phase: r.e_phase,
            e_z: r.e_z,
            p_det_z: r.p_det_z,
            key_rate: r.key_rate,
            plob: r.plob,
            gap: r.gap,
            status: r.status,
        }
    }
}

impl From<&PyScanRow> for core_scan::ScanRow {
    fn from(r: &PyScanRow) -> Self {
        Self {
            loss_db: r.loss_db,
            eta: r.eta,
            alpha: r.alpha,
            beta: r.beta,
            e_phase: r.e_phase,
            e_z: r.e_z,
            p_det_z: r.p_det_z,
            key_rate: r.key_rate,
            plob: r.plob,
            gap: r.gap,
            status: r.status.clone(),
        }
    }
}

#[pymethods]
impl PyScanRow {
    fn __repr__(&self) -> String {
        format!(
            "ScanRow(loss_db={}, alpha={}, beta={}, key_rate={:e}, status='{}')",
            self.loss_db, self.alpha, self.beta, self.key_rate, self.status
        )
    }
}

type StatsDict = BTreeMap<&'static str, BTreeMap<&'static str, f64>>;

/// Classified click statistics per prepared state: `stats[i][basis][outcome]`.
#[pyfunction]
fn expected_statistics(config: &PyConfig) -> PyResult<Vec<StatsDict>> {
    let table = cowqkd::expected_statistics(&config.inner).map_err(py_err)?;
    Ok(table
        .states
        .iter()
        .map(|st| {
            Basis::ALL
                .iter()
                .map(|&b| {
                    let inner = Outcome::ALL.iter().map(|&o| (outcome_name(o), st.prob(b, o))).collect();
                    (basis_name(b), inner)
                })
                .collect()
        })
        .collect())
}

type BoundsDict = BTreeMap<&'static str, BTreeMap<&'static str, (f64, f64)>>;

/// Squashed `(lower, upper)` probabilities: `bounds[i][basis][outcome]`.
#[pyfunction]
fn squash_bounds(config: &PyConfig) -> PyResult<Vec<BoundsDict>> {
    let stats = cowqkd::expected_statistics(&config.inner).map_err(py_err)?;
    let b = cowqkd::squash_bounds(&stats);
    Ok((0..b.num_states())
        .map(|i| {
            Basis::ALL
                .iter()
                .map(|&basis| {
                    let inner = SQUASHED_OUTCOMES
                        .iter()
                        .map(|&o| {
                            let iv = b.get(i, basis, o);
                            (outcome_name(o), (iv.lower, iv.upper))
                        })
                        .collect();
                    (basis_name(basis), inner)
                })
                .collect()
        })
        .collect())
}

#[pyfunction]
#[pyo3(signature = (config, tol = 1e-9, ez_mode = "worst-case"))]
fn key_rate(py: Python<'_>, config: &PyConfig, tol: f64, ez_mode: &str) -> PyResult<PyKeyRate> {
    let mode: ErrorRateMode = ez_mode.parse().map_err(py_err)?;
    let cfg = config.inner.clone();
    let r = py
        .detach(move || security::key_rate_with(&cfg, tol, mode))
        .map_err(py_err)?;
    Ok(PyKeyRate {
        e_phase: r.e_phase_certified,
        e_z: r.e_z_worst,
        p_det_z: r.p_det_z_lower,
        key_rate: r.key_rate,
        raw_rate: r.raw_rate,
        gap: r.duality_gap,
        primal_residual: r.primal_residual,
    })
}

/// Runs a scan described by a JSON specification.
#[pyfunction]
fn scan(py: Python<'_>, spec_json: &str) -> PyResult<Vec<PyScanRow>> {
    let spec = ScanSpec::from_json(spec_json).map_err(py_err)?;
    let rows = py.detach(move || core_scan::scan(&spec)).map_err(py_err)?;
    Ok(rows.into_iter().map(PyScanRow::from).collect())
}

/// CSV text of scan rows, with the command-line tool's header and format.
#[pyfunction]
fn to_csv(rows: Vec<PyRef<'_, PyScanRow>>) -> PyResult<String> {
    let rows: Vec<core_scan::ScanRow> = rows.iter().map(|r| core_scan::ScanRow::from(&**r)).collect();
    core_scan::to_csv_string(&rows).map_err(py_err)
}

/// Least-squares slope of `ln K` against `ln η` over the window.
#[pyfunction]
#[pyo3(signature = (rows, eta_min = 1e-3, eta_max = 1e-2))]
fn fit_scaling(rows: Vec<PyRef<'_, PyScanRow>>, eta_min: f64, eta_max: f64) -> PyResult<f64> {
    let rows: Vec<core_scan::ScanRow> = rows.iter().map(|r| core_scan::ScanRow::from(&**r)).collect();
    core_scan::fit_scaling(&rows, eta_min, eta_max).map_err(py_err)
}

#[pyfunction]
fn plob(eta: f64) -> f64 {
    core_scan::plob(eta)
}

/// Action of a `d × d` matrix on the `n`-photon symmetric subspace.
#[pyfunction]
fn symmetric_lift(matrix: Vec<Vec<Complex64>>, n: usize) -> PyResult<Vec<Vec<Complex64>>> {
    let m = to_matrix(matrix)?;
    Ok(from_matrix(&cowqkd::squashing::symmetric_lift(&m, n)))
}

/// Output distributions of the single-photon and photon-number-resolved
/// situations for occupation `k` and unitary `u`.
#[pyfunction]
fn situation_probs(k: Vec<u32>, u: Vec<Vec<Complex64>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let u = to_matrix(u)?;
    let dev = cowqkd::linalg::unitary_deviation(&u);
    if dev > cowqkd::fock::UNITARY_TOL * 1e3 {
        return Err(py_err(Error::NotUnitary { deviation: dev }));
    }
    cowqkd::fock::situation_probs(&OccupationVector::new(k), &u).map_err(py_err)
}

#[pymodule]
pub fn pycowqkd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyKeyRate>()?;
    m.add_class::<PyScanRow>()?;
    m.add_function(wrap_pyfunction!(expected_statistics, m)?)?;
    m.add_function(wrap_pyfunction!(squash_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(key_rate, m)?)?;
    m.add_function(wrap_pyfunction!(scan, m)?)?;
    m.add_function(wrap_pyfunction!(to_csv, m)?)?;
    m.add_function(wrap_pyfunction!(fit_scaling, m)?)?;
    m.add_function(wrap_pyfunction!(plob, m)?)?;
    m.add_function(wrap_pyfunction!(symmetric_lift, m)?)?;
    m.add_function(wrap_pyfunction!(situation_probs, m)?)?;
    Ok(())
}
