//! Python extension module exposing the main types and operations:
//! simulation, scan audits, ambiguity constructors, error metrics, and the
//! alternating-minimization reconstruction.

use ndarray::Array2;
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ptycho_core::{ambiguity, forward, metrics, recon, scan, synth};
use ptycho_core::{Boundary, GridGeometry};

fn err(e: ptycho_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_boundary(boundary: &str, bright: Option<Complex64>) -> PyResult<Boundary> {
    match boundary {
        "periodic" => Ok(Boundary::Periodic),
        "dark" => Ok(Boundary::Dark),
        "bright" => Ok(Boundary::Bright(
            bright.unwrap_or(Complex64::new(100.0, 0.0)),
        )),
        other => Err(PyValueError::new_err(format!(
            "boundary must be periodic|dark|bright, got {other:?}"
        ))),
    }
}

fn geometry(n: usize, m: usize, boundary: &str, bright: Option<Complex64>) -> PyResult<GridGeometry> {
    GridGeometry::new(n, m, parse_boundary(boundary, bright)?).map_err(err)
}

fn phase_block(psi: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let rows = psi.len();
    let cols = psi.first().map_or(0, Vec::len);
    if psi.iter().any(|row| row.len() != cols) {
        return Err(PyValueError::new_err("psi rows have unequal lengths"));
    }
    Ok(Array2::from_shape_fn((rows, cols), |(r, c)| psi[r][c]))
}

/// Rectangular array of complex amplitudes (object, probe, estimates).
#[pyclass(name = "ComplexImage", skip_from_py_object)]
#[derive(Clone)]
struct PyImage {
    inner: ptycho_core::ComplexImage,
}

#[pymethods]
impl PyImage {
    #[staticmethod]
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            inner: ptycho_core::ComplexImage::zeros(rows, cols),
        }
    }

    /// Builds from a row-major nested list of complex values.
    #[staticmethod]
    fn from_list(values: Vec<Vec<Complex64>>) -> PyResult<Self> {
        let rows = values.len();
        let cols = values.first().map_or(0, Vec::len);
        if values.iter().any(|row| row.len() != cols) {
            return Err(PyValueError::new_err("rows have unequal lengths"));
        }
        let flat: Vec<Complex64> = values.into_iter().flatten().collect();
        Ok(Self {
            inner: ptycho_core::ComplexImage::from_vec(rows, cols, flat).map_err(err)?,
        })
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols()
    }

    fn get(&self, row: usize, col: usize) -> PyResult<Complex64> {
        if row >= self.inner.rows() || col >= self.inner.cols() {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.inner.get(row, col))
    }

    fn to_list(&self) -> Vec<Vec<Complex64>> {
        (0..self.inner.rows())
            .map(|r| (0..self.inner.cols()).map(|c| self.inner.get(r, c)).collect())
            .collect()
    }

    fn norm(&self) -> f64 {
        self.inner.norm_l2()
    }

    fn scaled(&self, factor: Complex64) -> Self {
        Self {
            inner: self.inner.scaled(factor),
        }
    }

    fn __repr__(&self) -> String {
        format!("ComplexImage({}x{})", self.inner.rows(), self.inner.cols())
    }
}

/// Ordered set of integer probe shifts on a (possibly perturbed) raster.
#[pyclass(name = "ScanPattern", skip_from_py_object)]
#[derive(Clone)]
struct PyPattern {
    inner: ptycho_core::ScanPattern,
}

#[pymethods]
impl PyPattern {
    #[staticmethod]
    fn raster(n: usize, tau: usize) -> PyResult<Self> {
        Ok(Self {
            inner: ptycho_core::ScanPattern::raster(n, tau).map_err(err)?,
        })
    }

    #[staticmethod]
    fn perturbed_separable(n: usize, tau: usize, delta1: Vec<i64>, delta2: Vec<i64>) -> PyResult<Self> {
        Ok(Self {
            inner: ptycho_core::ScanPattern::perturbed_separable(n, tau, &delta1, &delta2)
                .map_err(err)?,
        })
    }

    #[staticmethod]
    fn perturbed_full(n: usize, tau: usize, delta1: Vec<i64>, delta2: Vec<i64>) -> PyResult<Self> {
        Ok(Self {
            inner: ptycho_core::ScanPattern::perturbed_full(n, tau, &delta1, &delta2)
                .map_err(err)?,
        })
    }

    #[staticmethod]
    fn uniform_separable(n: usize, tau: usize, bound: i64, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: ptycho_core::ScanPattern::uniform_separable(n, tau, bound, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn uniform_full(n: usize, tau: usize, bound: i64, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: ptycho_core::ScanPattern::uniform_full(n, tau, bound, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ptycho_core::ScanPattern::from_text(text).map_err(err)?,
        })
    }

    #[getter]
    fn tau(&self) -> usize {
        self.inner.tau()
    }

    #[getter]
    fn q(&self) -> usize {
        self.inner.q()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().as_str()
    }

    fn shifts(&self) -> Vec<(i64, i64)> {
        self.inner.shifts().to_vec()
    }

    fn shift(&self, k: usize, l: usize) -> PyResult<(i64, i64)> {
        if k >= self.inner.q() || l >= self.inner.q() {
            return Err(PyValueError::new_err("lattice index out of range"));
        }
        Ok(self.inner.shift(k, l))
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!(
            "ScanPattern(kind={}, tau={}, q={})",
            self.inner.kind().as_str(),
            self.inner.tau(),
            self.inner.q()
        )
    }
}

/// Per-shift Fourier magnitude frames.
#[pyclass(name = "DiffractionSet", skip_from_py_object)]
#[derive(Clone)]
struct PyData {
    inner: forward::DiffractionSet,
}

#[pymethods]
impl PyData {
    #[getter]
    fn os(&self) -> usize {
        self.inner.os
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    fn __len__(&self) -> usize {
        self.inner.frames.len()
    }

    fn frame(&self, index: usize) -> PyResult<Vec<Vec<f64>>> {
        let frame = self
            .inner
            .frames
            .get(index)
            .ok_or_else(|| PyValueError::new_err("frame index out of range"))?;
        Ok(frame.rows().into_iter().map(|r| r.to_vec()).collect())
    }

    fn pattern(&self) -> PyPattern {
        PyPattern {
            inner: self.inner.pattern.clone(),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "DiffractionSet(frames={}, side={})",
            self.inner.frames.len(),
            self.inner.frame_side()
        )
    }
}

/// Synthetic object of a named family: constant, ramp, random_complex, cib_like.
#[pyfunction]
fn synth_object(kind: &str, n: usize, seed: u64) -> PyResult<PyImage> {
    Ok(PyImage {
        inner: synth::object(synth::ObjectKind::parse(kind).map_err(err)?, n, seed)
            .map_err(err)?,
    })
}

/// Unit-modulus probe with i.i.d. uniform random phases.
#[pyfunction]
fn random_phase_probe(m: usize, seed: u64) -> PyImage {
    PyImage {
        inner: synth::random_phase_probe(m, seed),
    }
}

/// Ptychographic measurement of (f, mu) over a scan pattern.
#[pyfunction]
#[pyo3(signature = (f, mu, pattern, os=2, boundary="periodic", bright=None))]
fn measure(
    f: &PyImage,
    mu: &PyImage,
    pattern: &PyPattern,
    os: usize,
    boundary: &str,
    bright: Option<Complex64>,
) -> PyResult<PyData> {
    let geom = geometry(f.inner.rows(), mu.inner.rows(), boundary, bright)?;
    Ok(PyData {
        inner: forward::measure(&f.inner, &mu.inner, &geom, &pattern.inner, os).map_err(err)?,
    })
}

/// Audit report of a pattern against the uniqueness conditions, as a dict.
#[pyfunction]
fn audit<'py>(py: Python<'py>, pattern: &PyPattern, m: usize) -> PyResult<Bound<'py, PyDict>> {
    let rep = scan::audit(&pattern.inner, m);
    let d = PyDict::new(py);
    d.set_item("a1", rep.a1)?;
    d.set_item("a2", rep.a2)?;
    d.set_item("passes_small1", rep.passes_small1)?;
    d.set_item("passes_cover2", rep.passes_cover2)?;
    d.set_item("passes_small2", rep.passes_small2)?;
    d.set_item("qualifying", rep.qualifying)?;
    d.set_item("gcd1", rep.gcd1)?;
    d.set_item("gcd2", rep.gcd2)?;
    d.set_item("coprime_ok", rep.coprime_ok)?;
    d.set_item("overlap_ratio", rep.overlap_ratio)?;
    Ok(d)
}

/// Brute-force coverage check of the second-difference relation's domain.
#[pyfunction]
fn coverage_union(pattern: &PyPattern, m: usize, k: usize, l: usize, axis: u8) -> PyResult<bool> {
    scan::coverage_union(&pattern.inner, m, k, l, axis).map_err(err)
}

/// Second differences `2 d[k+1] - d[k] - d[k+2]`.
#[pyfunction]
fn second_differences(delta: Vec<i64>) -> PyResult<Vec<i64>> {
    scan::second_differences(&delta).map_err(err)
}

#[pyfunction]
fn scaling_pair(f: &PyImage, mu: &PyImage, c: f64) -> PyResult<(PyImage, PyImage)> {
    let (g, nu) = ambiguity::scaling_pair(&f.inner, &mu.inner, c).map_err(err)?;
    Ok((PyImage { inner: g }, PyImage { inner: nu }))
}

#[pyfunction]
fn affine_phase_pair(
    f: &PyImage,
    mu: &PyImage,
    a: f64,
    b: f64,
    w: (f64, f64),
) -> (PyImage, PyImage) {
    let (g, nu) = ambiguity::affine_phase_pair(&f.inner, &mu.inner, a, b, [w.0, w.1]);
    (PyImage { inner: g }, PyImage { inner: nu })
}

#[pyfunction]
fn progression_pair(
    f: &PyImage,
    mu: &PyImage,
    pattern: &PyPattern,
    theta00: f64,
    r: (f64, f64),
) -> PyResult<(PyImage, PyImage)> {
    let (g, nu) =
        ambiguity::progression_pair(&f.inner, &mu.inner, &pattern.inner, theta00, [r.0, r.1])
            .map_err(err)?;
    Ok((PyImage { inner: g }, PyImage { inner: nu }))
}

/// Raster-grid pathology pair; dispatches on the shift regime
/// (under-shifted vs over-shifted).
#[pyfunction]
fn pathology_pair(
    f: &PyImage,
    mu: &PyImage,
    pattern: &PyPattern,
    psi: Vec<Vec<f64>>,
    theta00: f64,
    r: (f64, f64),
) -> PyResult<(PyImage, PyImage)> {
    let psi = phase_block(psi)?;
    let m = mu.inner.rows();
    let result = if 2 * pattern.inner.tau() <= m {
        ambiguity::pathology_pair(&f.inner, &mu.inner, &pattern.inner, &psi, theta00, [r.0, r.1])
    } else {
        ambiguity::pathology_pair_overshift(
            &f.inner,
            &mu.inner,
            &pattern.inner,
            &psi,
            theta00,
            [r.0, r.1],
        )
    };
    let (g, nu) = result.map_err(err)?;
    Ok((PyImage { inner: g }, PyImage { inner: nu }))
}

/// Max relative magnitude deviation between the data of (g, nu) and (f, mu).
#[pyfunction]
#[pyo3(signature = (f, mu, g, nu, pattern, os=2, boundary="periodic", bright=None))]
#[allow(clippy::too_many_arguments)]
fn verify_same_data(
    f: &PyImage,
    mu: &PyImage,
    g: &PyImage,
    nu: &PyImage,
    pattern: &PyPattern,
    os: usize,
    boundary: &str,
    bright: Option<Complex64>,
) -> PyResult<f64> {
    let geom = geometry(f.inner.rows(), mu.inner.rows(), boundary, bright)?;
    ambiguity::verify_same_data(
        &f.inner, &mu.inner, &g.inner, &nu.inner, &geom, &pattern.inner, os,
    )
    .map_err(err)
}

/// Extracts per-shift block phases and fits the affine profile; returns a
/// dict with `theta` (length q*q, pattern order), `theta00`, `r`, `residual`.
#[pyfunction]
#[pyo3(signature = (f, mu, g, nu, pattern, boundary="periodic", bright=None))]
#[allow(clippy::too_many_arguments)]
fn block_phase_fit<'py>(
    py: Python<'py>,
    f: &PyImage,
    mu: &PyImage,
    g: &PyImage,
    nu: &PyImage,
    pattern: &PyPattern,
    boundary: &str,
    bright: Option<Complex64>,
) -> PyResult<Bound<'py, PyDict>> {
    let geom = geometry(f.inner.rows(), mu.inner.rows(), boundary, bright)?;
    let profile = ambiguity::extract_block_phases(
        &f.inner, &mu.inner, &g.inner, &nu.inner, &geom, &pattern.inner,
    )
    .map_err(err)?;
    let fit = ambiguity::fit_affine_profile(&profile, &pattern.inner).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("theta", profile.thetas().to_vec())?;
    d.set_item("max_spread", profile.max_spread)?;
    d.set_item("theta00", fit.theta00)?;
    d.set_item("r", (fit.r[0], fit.r[1]))?;
    d.set_item("residual", fit.residual)?;
    Ok(d)
}

/// Relative error minimized over a complex scale and an integer phase ramp.
#[pyfunction]
#[pyo3(signature = (truth, est, window, period=None))]
fn relative_error<'py>(
    py: Python<'py>,
    truth: &PyImage,
    est: &PyImage,
    window: i64,
    period: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let period = period.unwrap_or(truth.inner.rows());
    let re = metrics::relative_error_with_period(&truth.inner, &est.inner, window, period, false)
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("value", re.value)?;
    d.set_item("alpha", re.best_alpha)?;
    d.set_item("r", re.best_r)?;
    Ok(d)
}

/// Normalized magnitude mismatch between measured data of the pair and `data`.
#[pyfunction]
#[pyo3(signature = (data, f, mu, boundary="periodic", bright=None))]
fn data_residual(
    data: &PyData,
    f: &PyImage,
    mu: &PyImage,
    boundary: &str,
    bright: Option<Complex64>,
) -> PyResult<f64> {
    let geom = geometry(f.inner.rows(), mu.inner.rows(), boundary, bright)?;
    metrics::data_residual(
        &data.inner,
        &f.inner,
        &mu.inner,
        &geom,
        &data.inner.pattern.clone(),
        data.inner.os,
    )
    .map_err(err)
}

/// Aligned random probe initialization (positive per-pixel inner product
/// with the truth).
#[pyfunction]
#[pyo3(signature = (mu_truth, seed, margin=0.05))]
fn init_probe(mu_truth: &PyImage, seed: u64, margin: f64) -> PyImage {
    PyImage {
        inner: recon::init_probe(&mu_truth.inner, recon::ProbeInit::AlignedRandom { seed, margin }),
    }
}

/// Blind alternating-minimization reconstruction. Returns a dict with
/// `f_est`, `mu_est`, `converged`, and the per-epoch `history` rows
/// (epoch, data_residual, re_object, re_probe).
#[pyfunction]
#[pyo3(signature = (
    data, mu_init, f_truth=None, mu_truth=None, max_epochs=100, inner_iters=30,
    tol_data=1e-10, boundary="periodic", bright=None, enforce_boundary=true,
    re_window=None
))]
#[allow(clippy::too_many_arguments)]
fn reconstruct<'py>(
    py: Python<'py>,
    data: &PyData,
    mu_init: &PyImage,
    f_truth: Option<&PyImage>,
    mu_truth: Option<&PyImage>,
    max_epochs: usize,
    inner_iters: usize,
    tol_data: f64,
    boundary: &str,
    bright: Option<Complex64>,
    enforce_boundary: bool,
    re_window: Option<i64>,
) -> PyResult<Bound<'py, PyDict>> {
    let n = data.inner.pattern.n();
    let geom = geometry(n, data.inner.m, boundary, bright)?;
    let cfg = recon::ReconConfig {
        max_epochs,
        inner_iters,
        os: data.inner.os,
        tol_data,
        enforce_boundary,
        re_window,
        ..Default::default()
    };
    let state = recon::am_reconstruct(
        &data.inner,
        &geom,
        &data.inner.pattern.clone(),
        &mu_init.inner,
        f_truth.map(|p| &p.inner),
        mu_truth.map(|p| &p.inner),
        &cfg,
    )
    .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("f_est", PyImage { inner: state.f_est })?;
    d.set_item("mu_est", PyImage { inner: state.mu_est })?;
    d.set_item("converged", state.converged)?;
    let history: Vec<(usize, f64, Option<f64>, Option<f64>)> = state
        .history
        .iter()
        .map(|r| (r.epoch, r.data_residual, r.re_object, r.re_probe))
        .collect();
    d.set_item("history", history)?;
    Ok(d)
}

#[pymodule]
fn ptycho_rs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyPattern>()?;
    m.add_class::<PyData>()?;
    m.add_function(wrap_pyfunction!(synth_object, m)?)?;
    m.add_function(wrap_pyfunction!(random_phase_probe, m)?)?;
    m.add_function(wrap_pyfunction!(measure, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add_function(wrap_pyfunction!(coverage_union, m)?)?;
    m.add_function(wrap_pyfunction!(second_differences, m)?)?;
    m.add_function(wrap_pyfunction!(scaling_pair, m)?)?;
    m.add_function(wrap_pyfunction!(affine_phase_pair, m)?)?;
    m.add_function(wrap_pyfunction!(progression_pair, m)?)?;
    m.add_function(wrap_pyfunction!(pathology_pair, m)?)?;
    m.add_function(wrap_pyfunction!(verify_same_data, m)?)?;
    m.add_function(wrap_pyfunction!(block_phase_fit, m)?)?;
    m.add_function(wrap_pyfunction!(relative_error, m)?)?;
    m.add_function(wrap_pyfunction!(data_residual, m)?)?;
    m.add_function(wrap_pyfunction!(init_probe, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    Ok(())
}
