//! Python bindings for localiser-lab.
//!
//! Reports come back as plain dicts; matrices are nested lists of complex
//! numbers.

use localiser_lab::cli::{self, Command, ExperimentConfig, Regime};
use localiser_lab::ktheory::{kappa0_projection, projection_rank, QuasiProjection};
use localiser_lab::localiser::{
    build_localiser, half_signature_index, localiser_signature, offdiagonal_certificate_lattice,
    signature, thresholds, HalfSignatureOptions,
};
use localiser_lab::models::{block_model, circle_model, custom_model, direct_sum, fredholm_index_oracle, SpectralTripleModel};
use localiser_lab::operators::{CMatrix, GeneralMatrix, HermitianMatrix, C64};
use localiser_lab::pairing::{default_functions, defect_law, distance_law};
use localiser_lab::semifinite::semifinite_half_signature;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(localiser_lab, LocaliserError, PyException);

fn err(e: localiser_lab::Error) -> PyErr {
    LocaliserError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| LocaliserError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn to_cmatrix(rows: &[Vec<C64>]) -> PyResult<CMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(LocaliserError::new_err("ragged matrix"));
    }
    Ok(CMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn from_cmatrix(m: &CMatrix) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Finite truncation of a spectral triple with a unitary.
#[pyclass(name = "Model", module = "localiser_lab", frozen, from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: SpectralTripleModel,
}

#[pymethods]
impl PyModel {
    /// Circle model: D = diag(n) on n = -n_max..n_max, v the shift by `winding`.
    #[staticmethod]
    fn circle(n_max: usize, winding: i64) -> PyResult<Self> {
        circle_model(n_max, winding).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn direct_sum(models: Vec<PyModel>) -> PyResult<Self> {
        let parts: Vec<SpectralTripleModel> = models.into_iter().map(|m| m.inner).collect();
        direct_sum(&parts).map(|inner| Self { inner }).map_err(err)
    }

    /// Model from a real Dirac diagonal and a unitary matrix.
    #[staticmethod]
    fn custom(dirac: Vec<f64>, unitary: Vec<Vec<C64>>) -> PyResult<Self> {
        let v = GeneralMatrix::new(to_cmatrix(&unitary)?);
        custom_model(dirac, v).map(|inner| Self { inner }).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn winding(&self) -> Option<i64> {
        self.inner.shift()
    }

    #[getter]
    fn n_max(&self) -> Option<usize> {
        self.inner.n_max()
    }

    #[getter]
    fn comm_norm(&self) -> f64 {
        self.inner.comm_norm()
    }

    #[getter]
    fn dirac(&self) -> Vec<f64> {
        self.inner.dirac().to_vec()
    }

    fn oracle<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let w = fredholm_index_oracle(&self.inner).map_err(err)?;
        to_py(py, &w)
    }

    fn oracle_index(&self) -> PyResult<i64> {
        fredholm_index_oracle(&self.inner).map(|w| w.index).map_err(err)
    }

    #[pyo3(signature = (eps, delta, t=None, lam=None, certify=false, skip_certificates=false, zero_tol=None))]
    #[allow(clippy::too_many_arguments)]
    fn half_signature<'py>(
        &self,
        py: Python<'py>,
        eps: f64,
        delta: f64,
        t: Option<f64>,
        lam: Option<f64>,
        certify: bool,
        skip_certificates: bool,
        zero_tol: Option<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let opts = HalfSignatureOptions {
            t,
            lambda: lam,
            certify,
            skip_certificates,
            zero_tol,
        };
        let model = &self.inner;
        let r = py
            .detach(|| half_signature_index(model, eps, delta, &opts))
            .map_err(err)?;
        to_py(py, &r)
    }

    #[pyo3(signature = (kappa, lam, zero_tol=None))]
    fn localiser_signature<'py>(
        &self,
        py: Python<'py>,
        kappa: f64,
        lam: f64,
        zero_tol: Option<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let model = &self.inner;
        let r = py
            .detach(|| {
                let mut loc = build_localiser(model, kappa, lam)?;
                localiser_signature(&mut loc, zero_tol)
            })
            .map_err(err)?;
        to_py(py, &r)
    }

    #[pyo3(signature = (eps, delta, r=2.0))]
    fn thresholds<'py>(&self, py: Python<'py>, eps: f64, delta: f64, r: f64) -> PyResult<Bound<'py, PyAny>> {
        let rep = thresholds(eps, delta, self.inner.comm_norm(), r).map_err(err)?;
        to_py(py, &rep)
    }

    fn __repr__(&self) -> String {
        match (self.inner.n_max(), self.inner.shift()) {
            (Some(n), Some(k)) => format!("Model.circle(n_max={n}, winding={k})"),
            _ => format!("Model(dim={})", self.inner.dim()),
        }
    }
}

/// Inertia of a Hermitian matrix given as nested lists.
#[pyfunction]
#[pyo3(signature = (matrix, zero_tol=None))]
fn hermitian_signature<'py>(
    py: Python<'py>,
    matrix: Vec<Vec<C64>>,
    zero_tol: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let h = HermitianMatrix::new(to_cmatrix(&matrix)?).map_err(err)?;
    let r = signature(&h, zero_tol).map_err(err)?;
    to_py(py, &r)
}

/// κ₀ of a quasi-projection: the spectral projection onto (1/2, ∞) and its rank.
#[pyfunction]
fn kappa0(matrix: Vec<Vec<C64>>) -> PyResult<(Vec<Vec<C64>>, usize)> {
    let h = HermitianMatrix::new(to_cmatrix(&matrix)?).map_err(err)?;
    let e = QuasiProjection::new(h).map_err(err)?;
    let p = kappa0_projection(&e).map_err(err)?;
    let rank = projection_rank(p.matrix()).map_err(err)?;
    Ok((from_cmatrix(p.matrix()), rank))
}

#[pyfunction]
fn defect_law_check<'py>(py: Python<'py>, winding: i64, t: f64) -> PyResult<Bound<'py, PyAny>> {
    let r = defect_law(winding, t, default_functions()).map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
fn distance_law_check<'py>(py: Python<'py>, winding: i64, t: f64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &distance_law(winding, t, default_functions()))
}

/// Off-diagonal certificate on the circle lattice with the default functions.
#[pyfunction]
#[pyo3(signature = (winding, t, lam, delta=None))]
fn offdiagonal_certificate<'py>(
    py: Python<'py>,
    winding: i64,
    t: f64,
    lam: f64,
    delta: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let c = offdiagonal_certificate_lattice(winding, t, lam, default_functions(), delta).map_err(err)?;
    to_py(py, &c)
}

/// Weighted half-signature over B = ℂᵐ with one circle model per weight.
#[pyfunction]
#[pyo3(signature = (weights, windings, n_max, eps, delta, t=None, lam=None))]
#[allow(clippy::too_many_arguments)]
fn semifinite_index<'py>(
    py: Python<'py>,
    weights: Vec<f64>,
    windings: Vec<i64>,
    n_max: usize,
    eps: f64,
    delta: f64,
    t: Option<f64>,
    lam: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let bm = block_model(&weights, &windings, n_max).map_err(err)?;
    let opts = HalfSignatureOptions {
        t,
        lambda: lam,
        skip_certificates: true,
        ..Default::default()
    };
    let r = py
        .detach(|| semifinite_half_signature(&bm, eps, delta, &opts))
        .map_err(err)?;
    to_py(py, &r)
}

/// Run a CLI experiment from a JSON config string.
///
/// Returns `(passed, csv_text, certificates)`.
#[pyfunction]
#[pyo3(signature = (command, config_json, regime=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    command: &str,
    config_json: &str,
    regime: Option<&str>,
) -> PyResult<(bool, String, Bound<'py, PyAny>)> {
    use clap::ValueEnum;
    let command = Command::from_str(command, true).map_err(LocaliserError::new_err)?;
    let regime = regime
        .map(|r| Regime::from_str(r, true))
        .transpose()
        .map_err(LocaliserError::new_err)?;
    let config = ExperimentConfig::from_json(config_json).map_err(err)?;
    let report = py.detach(|| cli::run(&config, Some(command), regime)).map_err(err)?;
    let csv = report.csv().map_err(err)?;
    Ok((report.pass(), csv, to_py(py, &report.certificates)?))
}

#[pymodule]
#[pyo3(name = "localiser_lab")]
fn localiser_lab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LocaliserError", m.py().get_type::<LocaliserError>())?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(hermitian_signature, m)?)?;
    m.add_function(wrap_pyfunction!(kappa0, m)?)?;
    m.add_function(wrap_pyfunction!(defect_law_check, m)?)?;
    m.add_function(wrap_pyfunction!(distance_law_check, m)?)?;
    m.add_function(wrap_pyfunction!(offdiagonal_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(semifinite_index, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
