//! Python bindings: grids, spectra, the smoothing multiplier, time stepping,
//! the corrected energy, symbol audits and the experiment runners.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use nlslab_core::experiments::{self, data::base_profile, ExperimentConfig};
use nlslab_core::grid::{energy_spectrum, kinetic_energy, mass_spectrum, quartic_integral};
use nlslab_core::multiplier::{apply_i, energy_iu_spectrum, m_eval};
use nlslab_core::solver::{evolve as evolve_core, Integrator, SolverState};
use nlslab_core::symbols::{self as sym, AuditConfig, Stratum, TildeEnergy};
use nlslab_core::{io, Error, Freq, Grid2D, IMethodParams, Sign};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::InvalidGrid(_)
        | Error::InvalidParameter(_)
        | Error::GridMismatch
        | Error::NotDealiased(..)
        | Error::Arity { .. }
        | Error::Config(_)
        | Error::DegenerateRecipe(_) => PyValueError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Periodic box `[0, L)^2` with `M` collocation points per axis and dealias cutoff `K`.
#[pyclass(name = "Grid", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyGrid(Grid2D);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (modes, length = std::f64::consts::TAU, cutoff = None))]
    fn new(modes: usize, length: f64, cutoff: Option<usize>) -> PyResult<Self> {
        let grid = match cutoff {
            Some(k) => Grid2D::with_cutoff(modes, length, k),
            None => Grid2D::new(modes, length),
        };
        grid.map(Self).map_err(to_py)
    }

    #[getter]
    fn modes(&self) -> usize {
        self.0.modes()
    }

    #[getter]
    fn length(&self) -> f64 {
        self.0.length()
    }

    #[getter]
    fn cutoff(&self) -> usize {
        self.0.cutoff()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.0.spacing()
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid(modes={}, length={}, cutoff={})",
            self.0.modes(),
            self.0.length(),
            self.0.cutoff()
        )
    }
}

/// `N`, `s`, `theta0` (default `1/N`) and the nonlinearity sign (+1 defocusing, -1 focusing).
#[pyclass(name = "IMethodParams", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyParams(IMethodParams);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (n, s, theta0 = None, sign = 1))]
    fn new(n: f64, s: f64, theta0: Option<f64>, sign: i8) -> PyResult<Self> {
        let sign = Sign::try_from(sign).map_err(PyValueError::new_err)?;
        let p = IMethodParams::with_theta0(n, s, theta0.unwrap_or(1.0 / n)).map_err(to_py)?;
        Ok(Self(p.with_sign(sign)))
    }

    /// `m = 1` everywhere.
    #[staticmethod]
    fn identity() -> Self {
        Self(IMethodParams::identity())
    }

    #[getter]
    fn n(&self) -> f64 {
        self.0.n
    }

    #[getter]
    fn s(&self) -> f64 {
        self.0.s
    }

    #[getter]
    fn theta0(&self) -> f64 {
        self.0.theta0
    }

    #[getter]
    fn sign(&self) -> i8 {
        self.0.sign.into()
    }

    /// The radial multiplier `m(r)`.
    fn m(&self, r: f64) -> f64 {
        m_eval(r, &self.0)
    }

    fn __repr__(&self) -> String {
        format!(
            "IMethodParams(n={}, s={}, theta0={}, sign={})",
            self.0.n,
            self.0.s,
            self.0.theta0,
            i8::from(self.0.sign)
        )
    }
}

/// Fourier coefficients `c(k)` of a field, stored in FFT order.
#[pyclass(name = "Spectrum", from_py_object)]
#[derive(Clone)]
struct PySpectrum(nlslab_core::Spectrum);

#[pymethods]
impl PySpectrum {
    #[staticmethod]
    fn zeros(grid: PyGrid) -> Self {
        Self(nlslab_core::Spectrum::zeros(grid.0))
    }

    /// Coefficients in FFT storage order, `modes * modes` complex numbers.
    #[staticmethod]
    fn from_coefficients(grid: PyGrid, coefficients: Vec<Complex64>) -> PyResult<Self> {
        nlslab_core::Spectrum::from_coeffs(grid.0, coefficients)
            .map(Self)
            .map_err(to_py)
    }

    /// Unit-amplitude profile `<xi>^(-decay)` with seeded random phases.
    #[staticmethod]
    #[pyo3(signature = (grid, seed, decay = 3.0))]
    fn random(grid: PyGrid, seed: u64, decay: f64) -> Self {
        Self(base_profile(grid.0, decay, seed))
    }

    /// Seeded data scaled so that `E(Iu) <= energy_bound` and `||u||_2 <= mass_bound`.
    #[staticmethod]
    #[pyo3(signature = (grid, params, seed, decay = 3.0, mass_bound = 4.0, energy_bound = 1.0))]
    fn prepared(
        grid: PyGrid,
        params: PyParams,
        seed: u64,
        decay: f64,
        mass_bound: f64,
        energy_bound: f64,
    ) -> PyResult<Self> {
        let recipe = experiments::DataRecipe {
            seeds: vec![seed],
            decay,
            amplitude: None,
            mass_bound,
            energy_bound,
        };
        experiments::prepare_data(&recipe, grid.0, &params.0, seed)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        io::load_spectrum(&path).map(Self).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save_spectrum(&path, &self.0).map_err(to_py)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(*self.0.grid())
    }

    fn coefficients(&self) -> Vec<Complex64> {
        self.0.coeffs().to_vec()
    }

    fn __getitem__(&self, k: (i32, i32)) -> PyResult<Complex64> {
        let k = [k.0, k.1];
        if self.0.grid().storage_index(k).is_none() {
            return Err(PyIndexError::new_err(format!(
                "mode {k:?} is outside the grid"
            )));
        }
        Ok(self.0.get(k))
    }

    fn __setitem__(&mut self, k: (i32, i32), value: Complex64) -> PyResult<()> {
        self.0
            .set([k.0, k.1], value)
            .map_err(|e| PyIndexError::new_err(e.to_string()))
    }

    fn mass(&self) -> f64 {
        mass_spectrum(&self.0)
    }

    /// `E(u)` with the given nonlinearity sign.
    #[pyo3(signature = (sign = 1.0))]
    fn energy(&self, sign: f64) -> f64 {
        energy_spectrum(&self.0, sign)
    }

    fn kinetic(&self) -> f64 {
        kinetic_energy(&self.0)
    }

    /// `integral |u|^4`.
    fn quartic(&self) -> f64 {
        quartic_integral(&self.0)
    }

    /// The smoothed field `Iu`.
    fn apply_i(&self, params: PyParams) -> Self {
        Self(apply_i(&self.0, &params.0))
    }

    fn is_dealiased(&self) -> bool {
        self.0.is_dealiased()
    }

    fn __repr__(&self) -> String {
        format!(
            "Spectrum(modes={}, mass={:e})",
            self.0.grid().modes(),
            mass_spectrum(&self.0)
        )
    }
}

/// `E(Iu)`.
#[pyfunction]
fn energy_iu(spectrum: &PySpectrum, params: PyParams) -> f64 {
    energy_iu_spectrum(&spectrum.0, &params.0)
}

/// The corrected energy and its parts: `kinetic`, `quartic`, `correction`,
/// `e_iu`, `e_tilde` and `gap = E(Iu) - E~`.
#[pyfunction]
fn tilde_energy<'py>(
    py: Python<'py>,
    spectrum: &PySpectrum,
    params: PyParams,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = spectrum.0.clone();
    let v = py
        .detach(|| TildeEnergy::new(params.0).values(&spec))
        .map_err(to_py)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("kinetic", v.kinetic)?;
    out.set_item("quartic", v.quartic)?;
    out.set_item("correction", v.correction)?;
    out.set_item("e_iu", v.e_iu())?;
    out.set_item("e_tilde", v.e_tilde())?;
    out.set_item("gap", v.gap())?;
    Ok(out.into_any())
}

/// `dE~/dt` at the given state: quartic increment minus sextic increment.
#[pyfunction]
fn tilde_derivative(
    py: Python<'_>,
    spectrum: &PySpectrum,
    params: PyParams,
) -> PyResult<(f64, f64, f64)> {
    let spec = spectrum.0.clone();
    let t = py
        .detach(|| TildeEnergy::new(params.0).increment_terms(&spec))
        .map_err(to_py)?;
    Ok((t.quartic, t.sextic, t.derivative()))
}

/// Evolves to `t_final` with a fixed step; returns the final spectrum.
#[pyfunction]
#[pyo3(signature = (spectrum, params, t_final, dt = 1e-3, integrator = "ifrk4", nonlinear = true))]
fn evolve(
    py: Python<'_>,
    spectrum: &PySpectrum,
    params: PyParams,
    t_final: f64,
    dt: f64,
    integrator: &str,
    nonlinear: bool,
) -> PyResult<PySpectrum> {
    let integrator: Integrator = integrator.parse().map_err(to_py)?;
    let mut state =
        SolverState::new(spectrum.0.clone(), params.0, dt, integrator).map_err(to_py)?;
    if !nonlinear {
        state = state.linear();
    }
    let end = py
        .detach(|| evolve_core(&state, t_final, usize::MAX, |_, _| Ok(())))
        .map_err(to_py)?;
    Ok(PySpectrum(end.state.spectrum))
}

fn quad(xi: [(f64, f64); 4]) -> [Freq; 4] {
    xi.map(|(a, b)| [a, b])
}

#[pyfunction]
fn sigma4(xi: [(f64, f64); 4], params: PyParams) -> f64 {
    sym::sigma4(&quad(xi), &params.0)
}

#[pyfunction]
fn sigma4_tilde(xi: [(f64, f64); 4], params: PyParams) -> f64 {
    sym::sigma4_tilde(&quad(xi), &params.0)
}

#[pyfunction]
fn x_sigma2_sym(xi: [(f64, f64); 4], params: PyParams) -> f64 {
    sym::x_sigma2_sym(&quad(xi), &params.0)
}

#[pyfunction]
fn alpha4(xi: [(f64, f64); 4]) -> f64 {
    sym::alpha4(&quad(xi))
}

/// Sampled maxima of the symbol-bound ratios, as a dict.
#[pyfunction]
#[pyo3(signature = (params, samples = 100_000, seed = 1, stratum = "all"))]
fn audit_symbol_bounds<'py>(
    py: Python<'py>,
    params: PyParams,
    samples: usize,
    seed: u64,
    stratum: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let stratum: Stratum = stratum.parse().map_err(to_py)?;
    let cfg = AuditConfig::new(params.0, samples, seed, stratum);
    let report = py.detach(|| sym::audit_symbol_bounds(&cfg));
    json_to_py(py, &report)
}

/// Default experiment config for a kind (`acl-sweep`, `strichartz`, ...), as a dict.
#[pyfunction]
fn default_config<'py>(py: Python<'py>, kind: &str) -> PyResult<Bound<'py, PyAny>> {
    let kind: experiments::ExperimentKind =
        serde_json::from_value(serde_json::Value::String(kind.to_string()))
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &ExperimentConfig::new(kind))
}

/// Runs a sweep from a JSON config string and returns the result as a dict.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyAny>> {
    let config = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    let result = py
        .detach(|| experiments::run_experiment(&config))
        .map_err(to_py)?;
    json_to_py(py, &result)
}

#[pymodule]
fn nlslab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PySpectrum>()?;
    m.add_function(wrap_pyfunction!(energy_iu, m)?)?;
    m.add_function(wrap_pyfunction!(tilde_energy, m)?)?;
    m.add_function(wrap_pyfunction!(tilde_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(sigma4, m)?)?;
    m.add_function(wrap_pyfunction!(sigma4_tilde, m)?)?;
    m.add_function(wrap_pyfunction!(x_sigma2_sym, m)?)?;
    m.add_function(wrap_pyfunction!(alpha4, m)?)?;
    m.add_function(wrap_pyfunction!(audit_symbol_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
