//! Python bindings. Reports come back as plain dictionaries.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use spinspec::analysis::{self, Suite};
use spinspec::problem::{self, ProblemSpec};
use spinspec::spectral;
use spinspec::{catalog, Error};

create_exception!(spinspec_py, SpinspecError, PyException);
create_exception!(spinspec_py, SpinStructureError, SpinspecError);
create_exception!(spinspec_py, EllipticityError, SpinspecError);
create_exception!(spinspec_py, TruncationError, SpinspecError);

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Validation(_) | Error::MetricMismatch { .. } | Error::NonpositiveWeight { .. } => PyValueError::new_err(msg),
        Error::SpinStructureMismatch { .. } | Error::ChargeMismatch => SpinStructureError::new_err(msg),
        Error::NotElliptic { .. } | Error::ChargeInconsistent { .. } => EllipticityError::new_err(msg),
        Error::TruncationTooSmall { .. } => TruncationError::new_err(msg),
        _ => SpinspecError::new_err(msg),
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| SpinspecError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A validated problem: symbol, reference, weight and discretization.
#[pyclass(frozen, module = "spinspec_py")]
struct Problem {
    spec: ProblemSpec,
    inner: problem::Problem,
}

impl Problem {
    fn from_spec(spec: ProblemSpec) -> PyResult<Self> {
        let inner = spec.validate().map_err(to_py)?;
        Ok(Self { spec, inner })
    }
}

#[pymethods]
impl Problem {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::from_spec(ProblemSpec::from_json(text).map_err(to_py)?)
    }

    #[staticmethod]
    fn from_file(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| PyValueError::new_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Twisted symbol turning `turns` times along the third axis.
    #[staticmethod]
    #[pyo3(signature = (turns = 2, flipped = false))]
    fn twisted(turns: i32, flipped: bool) -> PyResult<Self> {
        let mut spec = ProblemSpec::from_symbol(&catalog::twisted_symbol(turns, flipped));
        if flipped {
            spec = spec.with_reference(problem::ReferenceSpec::Named(problem::NamedReference::FlippedPauli));
        }
        Self::from_spec(spec)
    }

    #[getter]
    fn name(&self) -> Option<String> {
        self.inner.name.clone()
    }

    #[getter]
    fn grid(&self) -> usize {
        self.inner.grid
    }

    #[getter]
    fn truncation(&self) -> usize {
        self.inner.truncation
    }

    #[getter]
    fn degree(&self) -> i32 {
        self.inner.symbol.degree()
    }

    fn to_json(&self) -> String {
        self.spec.to_json()
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(name={:?}, degree={}, grid={}, truncation={})",
            self.inner.name,
            self.inner.symbol.degree(),
            self.inner.grid,
            self.inner.truncation
        )
    }
}

/// Geometric report: metric summary, charge, spin structure, action, a and b.
#[pyfunction]
fn analyze<'py>(py: Python<'py>, problem: &Problem) -> PyResult<Bound<'py, PyAny>> {
    let report = py.detach(|| analysis::analyze(&problem.inner)).map_err(to_py)?;
    to_dict(py, &report)
}

/// Randomized invariance suites; `suite` is a suite name or `"all"`.
#[pyfunction]
#[pyo3(signature = (problem, suite = "all", seed = 42))]
fn verify<'py>(py: Python<'py>, problem: &Problem, suite: &str, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let suites = Suite::parse(suite).ok_or_else(|| PyValueError::new_err(format!("unknown suite {suite:?}")))?;
    let report = py.detach(|| analysis::verify(&problem.inner, &suites, seed)).map_err(to_py)?;
    to_dict(py, &report)
}

/// Galerkin spectrum, counting table and asymptotic comparison. Missing
/// coefficients are taken from `analyze`.
#[pyfunction]
#[pyo3(signature = (problem, m = None, lambda_max = 10.0, a = None, b = None))]
fn spectrum<'py>(
    py: Python<'py>,
    problem: &Problem,
    m: Option<usize>,
    lambda_max: f64,
    a: Option<f64>,
    b: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let p = &problem.inner;
    let report = py
        .detach(|| {
            let (a, b) = match (a, b) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    let r = analysis::analyze(p)?;
                    (a.unwrap_or(r.a), b.unwrap_or(r.b()))
                }
            };
            analysis::spectrum(p, m.unwrap_or(p.truncation), lambda_max, a, b)
        })
        .map_err(to_py)?;
    to_dict(py, &report)
}

/// Exact counting table of the double-turn example at half-integers.
#[pyfunction]
#[pyo3(signature = (lambda_max = 100.0, a = analysis::example_a(), b = analysis::example_b()))]
fn count<'py>(py: Python<'py>, lambda_max: f64, a: f64, b: f64) -> PyResult<Bound<'py, PyAny>> {
    let (table, report) = py.detach(|| analysis::exact_count(lambda_max, a, b));
    to_dict(py, &(table, report))
}

/// Number of integer points strictly inside the sphere of radius `r`.
#[pyfunction]
fn lattice_count(r: f64) -> u64 {
    spectral::lattice_count(r)
}

/// Eigenvalues of the double-turn example with `|λ| ≤ bound`, sorted.
#[pyfunction]
fn exact_example_spectrum(bound: f64) -> Vec<f64> {
    spectral::exact_example_spectrum(bound)
}

#[pymodule]
fn spinspec_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(count, m)?)?;
    m.add_function(wrap_pyfunction!(lattice_count, m)?)?;
    m.add_function(wrap_pyfunction!(exact_example_spectrum, m)?)?;
    m.add("SpinspecError", m.py().get_type::<SpinspecError>())?;
    m.add("SpinStructureError", m.py().get_type::<SpinStructureError>())?;
    m.add("EllipticityError", m.py().get_type::<EllipticityError>())?;
    m.add("TruncationError", m.py().get_type::<TruncationError>())?;
    Ok(())
}
