//! Python bindings for `twoweight`.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use twoweight::config::Settings;
use twoweight::ensemble::{EnsembleKind, EnsembleParams};
use twoweight::hilbert::IntervalMode;
use twoweight::measure::{GridInterval, GridMeasure};

fn py_err(e: twoweight::Error) -> PyErr {
    match e {
        twoweight::Error::Io(m) => PyOSError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Any serializable value as plain Python objects.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Nonnegative masses on the cells `[k 2^-m, (k+1) 2^-m)`.
#[pyclass(name = "Measure", module = "twoweight", frozen)]
struct PyMeasure {
    inner: GridMeasure,
}

#[pymethods]
impl PyMeasure {
    /// `cells` is a list of `(cell index, mass)`.
    #[new]
    fn new(scale_exponent: i32, cells: Vec<(i64, f64)>) -> PyResult<Self> {
        GridMeasure::from_cells(scale_exponent, cells).map(|inner| Self { inner }).map_err(py_err)
    }

    /// Snap `(position, mass)` atoms to the grid of scale `2^-scale_exponent`.
    #[staticmethod]
    fn from_atoms(atoms: Vec<(f64, f64)>, scale_exponent: i32) -> PyResult<Self> {
        GridMeasure::from_atoms(&atoms, scale_exponent).map(|inner| Self { inner }).map_err(py_err)
    }

    #[getter]
    fn scale_exponent(&self) -> i32 {
        self.inner.scale()
    }

    #[getter]
    fn total_mass(&self) -> f64 {
        self.inner.total_mass()
    }

    fn atoms(&self) -> Vec<(i64, f64)> {
        self.inner.atoms().collect()
    }

    /// Mass of the cells `lo..=hi`.
    fn interval_mass(&self, lo: i64, hi: i64) -> PyResult<f64> {
        let i = GridInterval::new(lo, hi).map_err(py_err)?;
        Ok(self.inner.interval_mass(&i))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Measure(scale_exponent={}, atoms={})", self.inner.scale(), self.inner.len())
    }
}

/// The bilinear form of the Hilbert transform between `sigma` and `w`.
#[pyclass(name = "HilbertForm", module = "twoweight", frozen)]
struct PyHilbertForm {
    inner: twoweight::hilbert::HilbertForm,
}

fn mode(name: &str) -> PyResult<IntervalMode> {
    name.parse().map_err(py_err)
}

#[pymethods]
impl PyHilbertForm {
    #[new]
    fn new(sigma: PyRef<'_, PyMeasure>, w: PyRef<'_, PyMeasure>) -> PyResult<Self> {
        twoweight::hilbert::HilbertForm::new(sigma.inner.clone(), w.inner.clone())
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    /// `{"value", "power", "iterations", "dense"}`
    fn operator_norm<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.operator_norm())
    }

    #[pyo3(signature = (mode_name = "exhaustive"))]
    fn testing_constants<'py>(&self, py: Python<'py>, mode_name: &str) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.testing_constants(mode(mode_name)?))
    }

    fn weak_boundedness<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.weak_boundedness())
    }

    /// `[K_0, ..., K_n_max]`
    fn windowed_constants(&self, n_max: u32) -> Vec<f64> {
        self.inner.windowed_constants(n_max)
    }

    fn a2_constants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &twoweight::a2::a2_constants(&self.inner))
    }
}

/// `{"a", "c"}` for the Hardy operator and its norm estimate.
#[pyfunction]
fn hardy<'py>(py: Python<'py>, sigma: PyRef<'_, PyMeasure>, w: PyRef<'_, PyMeasure>) -> PyResult<Bound<'py, PyAny>> {
    let a = twoweight::hardy::hardy_constant(&sigma.inner, &w.inner).map_err(py_err)?;
    let c = twoweight::hardy::hardy_norm(&sigma.inner, &w.inner).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("a", a)?;
    d.set_item("c", to_py(py, &c)?)?;
    Ok(d.into_any())
}

#[pyfunction]
fn halfline<'py>(py: Python<'py>, sigma: PyRef<'_, PyMeasure>, w: PyRef<'_, PyMeasure>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &twoweight::hardy::halfline_characterization(&sigma.inner, &w.inner).map_err(py_err)?)
}

/// `(lhs, rhs)` of the tail power inequality.
#[pyfunction]
fn tail_power_bound(w: PyRef<'_, PyMeasure>, t: f64, alpha: f64) -> PyResult<(f64, f64)> {
    twoweight::hardy::tail_power_bound(&w.inner, t, alpha).map_err(py_err)
}

/// `(sigma, w)` from the text of a measure file.
#[pyfunction]
#[pyo3(signature = (text, scale_exponent = None))]
fn parse_measures(text: &str, scale_exponent: Option<i32>) -> PyResult<(PyMeasure, PyMeasure)> {
    let f = twoweight::io::parse_measures(text, scale_exponent).map_err(py_err)?;
    Ok((PyMeasure { inner: f.sigma }, PyMeasure { inner: f.w }))
}

#[pyfunction]
fn format_measures(sigma: PyRef<'_, PyMeasure>, w: PyRef<'_, PyMeasure>) -> PyResult<String> {
    twoweight::io::format_measures(&sigma.inner, &w.inner).map_err(py_err)
}

/// `[(label, sigma, w)]` for a seeded ensemble.
#[pyfunction]
#[pyo3(signature = (kind, n, count, seed = 0))]
fn ensemble(kind: &str, n: usize, count: usize, seed: u64) -> PyResult<Vec<(String, PyMeasure, PyMeasure)>> {
    let kind: EnsembleKind = kind.parse().map_err(py_err)?;
    let list = twoweight::ensemble::ensemble(&EnsembleParams { kind, n, count, seed }).map_err(py_err)?;
    Ok(list.into_iter().map(|i| (i.label, PyMeasure { inner: i.sigma }, PyMeasure { inner: i.w })).collect())
}

/// Every constant, ratio and verdict for one pair, as in a report row.
#[pyfunction]
#[pyo3(signature = (sigma, w, gamma = None, r = None, tolerance = None, budget_seconds = None, seed = None, interval_mode = None))]
#[allow(clippy::too_many_arguments)]
fn analyze<'py>(
    py: Python<'py>,
    sigma: PyRef<'_, PyMeasure>,
    w: PyRef<'_, PyMeasure>,
    gamma: Option<f64>,
    r: Option<u32>,
    tolerance: Option<f64>,
    budget_seconds: Option<f64>,
    seed: Option<u64>,
    interval_mode: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let settings = Settings {
        gamma,
        r,
        tolerance,
        budget_seconds,
        seed,
        interval_mode: interval_mode.map(mode).transpose()?,
        ..Settings::default()
    };
    let cfg = settings.resolve().map_err(py_err)?;
    let (rep, _) = twoweight::report::analyze(0, "python", &sigma.inner, &w.inner, &cfg);
    to_py(py, &rep)
}

#[pymodule(name = "twoweight")]
fn twoweight_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyHilbertForm>()?;
    m.add_function(wrap_pyfunction!(hardy, m)?)?;
    m.add_function(wrap_pyfunction!(halfline, m)?)?;
    m.add_function(wrap_pyfunction!(tail_power_bound, m)?)?;
    m.add_function(wrap_pyfunction!(parse_measures, m)?)?;
    m.add_function(wrap_pyfunction!(format_measures, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    Ok(())
}
