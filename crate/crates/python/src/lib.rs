//! Python bindings for `osfield`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use nalgebra::DMatrix;
use osfield::harness::checks::random_lags;
use osfield::harness::modulus::{default_lil_radii, default_umc_radii};
use osfield::harness::{self, Curve};
use osfield::sampler::{self, model_fingerprint, Method};
use osfield::{ExponentSpec, FieldError, FieldModel, FrequencyBand, HVector, ModelConfig};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn to_py(e: FieldError) -> PyErr {
    match e {
        FieldError::Numeric(_) | FieldError::Certification { .. } => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> OrPy<T> for osfield::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// Round-trips a serializable report through `json.loads`.
fn to_dict<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Scaling exponent `E` in real Jordan form.
#[pyclass(name = "Exponent", module = "osfield_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyExponent {
    inner: ExponentSpec,
}

#[pymethods]
impl PyExponent {
    /// `E = diag(a_1, ..., a_N)`.
    #[staticmethod]
    fn diagonal(a: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: ExponentSpec::diagonal(&a).py_err()?,
        })
    }

    /// Real Jordan decomposition of a square matrix given as rows.
    #[staticmethod]
    fn from_matrix(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(PyValueError::new_err("matrix must be square"));
        }
        let m = nalgebra_rows(&rows);
        Ok(Self {
            inner: ExponentSpec::from_matrix(&m).py_err()?,
        })
    }

    /// Blocks and optional similarity `P` as JSON.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// `Q = tr E`.
    #[getter]
    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    /// `H_j = 1 / a_j`, ascending.
    #[getter]
    fn h(&self) -> Vec<f64> {
        self.inner.h_vector().0
    }

    fn tau(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.tau(&x).py_err()
    }

    fn e_norm(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.e_norm(&x).py_err()
    }

    /// `(τ_E(x), l_E(x))`; the direction is `None` at the origin.
    fn polar(&self, x: Vec<f64>) -> PyResult<(f64, Option<Vec<f64>>)> {
        let p = self.inner.polar_decompose(&x).py_err()?;
        Ok((p.tau, p.direction))
    }

    /// `c^E` as a list of rows.
    fn power(&self, c: f64) -> PyResult<Vec<Vec<f64>>> {
        let m = self.inner.matrix_power(c).py_err()?;
        Ok((0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
    }

    /// `c^E x`.
    fn apply_power(&self, c: f64, x: Vec<f64>) -> PyResult<Vec<f64>> {
        if !(c > 0.0) {
            return Err(PyValueError::new_err("c must be positive"));
        }
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "expected {} coordinates",
                self.inner.dim()
            )));
        }
        Ok(self.inner.apply_power_log(c.ln(), &x))
    }

    fn __repr__(&self) -> String {
        format!("Exponent({})", self.to_json().unwrap_or_default())
    }
}

fn nalgebra_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// Field model: exponent, spectral density and quadrature profile.
#[pyclass(name = "Model", module = "osfield_py", frozen)]
struct PyModel {
    inner: FieldModel,
}

#[pymethods]
impl PyModel {
    /// Model with the default density `τ_{E'}` for `exponent`.
    #[new]
    fn new(exponent: &PyExponent) -> PyResult<Self> {
        Ok(Self {
            inner: FieldModel::tau_dual(exponent.inner.clone()).py_err()?,
        })
    }

    /// Full model configuration (exponent, psi, quadrature) as JSON.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let cfg: ModelConfig = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self {
            inner: cfg.build().py_err()?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn exponent(&self) -> PyExponent {
        PyExponent {
            inner: self.inner.exponent().clone(),
        }
    }

    #[getter]
    fn fingerprint(&self) -> String {
        model_fingerprint(&self.inner)
    }

    fn variogram(&self, h: Vec<f64>) -> PyResult<f64> {
        self.inner.variogram(&h).py_err()
    }

    /// Variogram restricted to frequencies with `lo < τ_{E'}(ξ) ≤ hi`.
    #[pyo3(signature = (h, lo, hi=None))]
    fn variogram_band(&self, h: Vec<f64>, lo: f64, hi: Option<f64>) -> PyResult<f64> {
        let band = FrequencyBand::new(lo, hi.unwrap_or(f64::INFINITY)).py_err()?;
        self.inner.variogram_band(&h, &band).py_err()
    }

    fn variogram_many(&self, py: Python<'_>, lags: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        py.detach(|| self.inner.variogram_many(&lags)).py_err()
    }

    fn covariance(&self, s: Vec<f64>, t: Vec<f64>) -> PyResult<f64> {
        self.inner.covariance(&s, &t).py_err()
    }

    fn covariance_matrix(&self, py: Python<'_>, points: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let m = py.detach(|| self.inner.covariance_matrix(&points)).py_err()?;
        Ok((0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
    }

    /// `γ(h) / τ_E(h)²`.
    fn comparability_ratio(&self, h: Vec<f64>) -> PyResult<f64> {
        self.inner.comparability_ratio(&h).py_err()
    }

    fn truncation_radius(&self) -> PyResult<f64> {
        self.inner.truncation_radius().py_err()
    }
}

/// Exact Gaussian sample at `points` (the origin is pinned to zero).
#[pyfunction]
fn sample_cholesky(py: Python<'_>, model: &PyModel, points: Vec<Vec<f64>>, seed: u64) -> PyResult<Vec<f64>> {
    let r = py
        .detach(|| sampler::sample_cholesky(&model.inner, &points, seed))
        .py_err()?;
    Ok(r.values)
}

/// Spectral-sum sample, optionally restricted to a frequency band.
#[pyfunction]
#[pyo3(signature = (model, points, seed, freq_count=16384, lo=0.0, hi=None))]
fn sample_spectral(
    py: Python<'_>,
    model: &PyModel,
    points: Vec<Vec<f64>>,
    seed: u64,
    freq_count: usize,
    lo: f64,
    hi: Option<f64>,
) -> PyResult<Vec<f64>> {
    let band = FrequencyBand::new(lo, hi.unwrap_or(f64::INFINITY)).py_err()?;
    let r = py
        .detach(|| sampler::sample_spectral(&model.inner, &points, &band, freq_count, seed))
        .py_err()?;
    Ok(r.values)
}

/// `count` Cholesky replicas on independent substreams of `seed`.
#[pyfunction]
fn replicate_cholesky(
    py: Python<'_>,
    model: &PyModel,
    points: Vec<Vec<f64>>,
    count: usize,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let reps = py
        .detach(|| sampler::replicate(&model.inner, &points, &Method::Cholesky, count, seed))
        .py_err()?;
    Ok(reps.into_iter().map(|r| r.values).collect())
}

/// Points of the dyadic grid `{k / 2^level}` in `[0, 1)^dim`.
#[pyfunction]
fn dyadic_grid(dim: usize, level: u32) -> PyResult<Vec<Vec<f64>>> {
    Ok(harness::modulus::DyadicGrid::new(dim, level).py_err()?.points())
}

#[pyfunction]
fn dimensions<'py>(py: Python<'py>, h: Vec<f64>, d: u32) -> PyResult<Bound<'py, PyAny>> {
    let hv = HVector::new(h).py_err()?;
    to_dict(py, &harness::dimensions(&hv, d))
}

#[pyfunction]
fn alpha_theta(a: f64, theta: f64) -> PyResult<f64> {
    harness::alpha_theta(a, theta).py_err()
}

/// `(θ₀, α(θ₀))` at the minimum of `α`.
#[pyfunction]
fn alpha_argmin(a: f64) -> PyResult<(f64, f64)> {
    harness::alpha_argmin(a).py_err()
}

/// Curve table for `family` in `"log_shift"`, `"axis"`, `"fixed_theta"`.
#[pyfunction]
#[pyo3(signature = (a, family, y_norms, param=0.0))]
fn planar_cell_curves<'py>(
    py: Python<'py>,
    a: f64,
    family: &str,
    y_norms: Vec<f64>,
    param: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let curve = match family {
        "log_shift" => Curve::LogShift { c: param },
        "axis" => Curve::Axis,
        "fixed_theta" => Curve::FixedTheta { theta: param },
        other => return Err(PyValueError::new_err(format!("unknown curve family `{other}`"))),
    };
    to_dict(py, &harness::planar_cell_curves(a, curve, &y_norms).py_err()?)
}

#[pyfunction]
fn slnd_ratio(model: &PyModel, points: Vec<Vec<f64>>) -> PyResult<f64> {
    harness::slnd_ratio(&model.inner, &points).py_err()
}

#[pyfunction]
#[pyo3(signature = (model, seed, lags=20, factors=vec![0.25, 0.5, 2.0, 4.0]))]
fn scaling_check<'py>(
    py: Python<'py>,
    model: &PyModel,
    seed: u64,
    lags: usize,
    factors: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let hs = random_lags(model.inner.dim(), lags, seed);
    let r = py
        .detach(|| harness::scaling_check(&model.inner, &hs, &factors))
        .py_err()?;
    to_dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (model, seed, count=100))]
fn truncation_study<'py>(py: Python<'py>, model: &PyModel, seed: u64, count: usize) -> PyResult<Bound<'py, PyAny>> {
    let r = py
        .detach(|| harness::truncation_study(&model.inner, count, seed))
        .py_err()?;
    to_dict(py, &r)
}

/// Uniform and local sup statistics on the dyadic grid; returns
/// `(umc_report, lil_report)`.
#[pyfunction]
#[pyo3(signature = (model, seed, level=6, replicas=20, radii=4, smallest_ball=200))]
fn grid_moduli<'py>(
    py: Python<'py>,
    model: &PyModel,
    seed: u64,
    level: u32,
    replicas: usize,
    radii: usize,
    smallest_ball: usize,
) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let m = &model.inner;
    let (umc, lil) = py
        .detach(|| {
            let ur = default_umc_radii(m, level, radii)?;
            let lr = default_lil_radii(m, level, smallest_ball, radii)?;
            harness::estimate_grid_moduli(m, level, &ur, &lr, replicas, seed)
        })
        .py_err()?;
    Ok((to_dict(py, &umc)?, to_dict(py, &lil)?))
}

#[pymodule]
pub fn osfield_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExponent>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(sample_cholesky, m)?)?;
    m.add_function(wrap_pyfunction!(sample_spectral, m)?)?;
    m.add_function(wrap_pyfunction!(replicate_cholesky, m)?)?;
    m.add_function(wrap_pyfunction!(dyadic_grid, m)?)?;
    m.add_function(wrap_pyfunction!(dimensions, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_theta, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_argmin, m)?)?;
    m.add_function(wrap_pyfunction!(planar_cell_curves, m)?)?;
    m.add_function(wrap_pyfunction!(slnd_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(scaling_check, m)?)?;
    m.add_function(wrap_pyfunction!(truncation_study, m)?)?;
    m.add_function(wrap_pyfunction!(grid_moduli, m)?)?;
    Ok(())
}
