//! Python bindings. Sequences cross the boundary as plain lists; complex
//! values map to Python `complex`.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use qst_core::{self as core, QstError};

create_exception!(qst_channel, NumericalError, PyException);

fn to_py(err: QstError) -> PyErr {
    match err {
        QstError::InvalidParams(_) | QstError::InvalidState(_) | QstError::InvalidTimeGrid(_) | QstError::Regime(_) => {
            PyValueError::new_err(err.to_string())
        }
        _ => NumericalError::new_err(err.to_string()),
    }
}

#[pyclass(name = "ModelParams", frozen, eq)]
#[derive(PartialEq)]
struct PyModelParams {
    inner: core::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    fn new(n: usize, l: usize, g: f64, omega: f64) -> PyResult<Self> {
        let inner = core::ModelParams::new(n, l, g, omega).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n_modes()
    }

    #[getter]
    fn l(&self) -> usize {
        self.inner.distance()
    }

    #[getter]
    fn g(&self) -> f64 {
        self.inner.coupling()
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.inner.impurity_energy()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn __repr__(&self) -> String {
        format!("ModelParams(n={}, l={}, g={}, omega={})", self.n(), self.l(), self.g(), self.omega())
    }
}

#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory {
    inner: core::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn t(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn p_a(&self) -> Vec<f64> {
        self.inner.p_a.clone()
    }

    #[getter]
    fn p_b(&self) -> Vec<f64> {
        self.inner.p_b.clone()
    }

    #[getter]
    fn p_chan(&self) -> Vec<f64> {
        self.inner.p_chan.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(max_p_b, t_at_max)` with parabolic refinement around the grid peak.
    fn transfer_metrics(&self) -> PyResult<(f64, f64)> {
        let m = core::transfer_metrics(&self.inner).map_err(to_py)?;
        Ok((m.max_p_b, m.t_at_max))
    }
}

#[pyclass(name = "Pole", frozen, get_all)]
struct PyPole {
    omega: f64,
    parity: &'static str,
    residue_weight: f64,
}

#[pymethods]
impl PyPole {
    fn __repr__(&self) -> String {
        format!("Pole(omega={}, parity={}, residue_weight={})", self.omega, self.parity, self.residue_weight)
    }
}

#[pyclass(name = "RabiPrediction", frozen, get_all)]
struct PyRabi {
    omega_plus: f64,
    omega_minus: f64,
    omega_plus_continuum: f64,
    omega_minus_continuum: f64,
    rabi_period: f64,
}

#[pyclass(name = "ResonantPrediction", frozen, get_all)]
struct PyResonant {
    gamma_big: f64,
    resonant_energy: f64,
    /// `(δ₁₊, δ₁₋, δ₂₊, δ₂₋)` from the closed-form expansion.
    delta_closed: (f64, f64, f64, f64),
    /// The same roots solved to machine precision.
    delta_polished: (f64, f64, f64, f64),
    regime_flag: &'static str,
    t_star: Option<f64>,
}

#[pyclass(name = "StrongPrediction", frozen, get_all)]
struct PyStrong {
    fast_freq: f64,
    slow_freq: f64,
}

#[pyclass(name = "RegimeReport", frozen, get_all)]
struct PyRegimeReport {
    regime: &'static str,
    g_sqrt_n: f64,
    abs_omega: f64,
    outside_band: bool,
    resonance_offset: f64,
    nearest_energy: f64,
    resonant: bool,
}

fn tuple4(d: core::DeltaRoots) -> (f64, f64, f64, f64) {
    (d.d1_plus, d.d1_minus, d.d2_plus, d.d2_minus)
}

/// Single-excitation Hamiltonian as nested lists, basis `[A, B, k_0 … k_{N−1}]`.
#[pyfunction]
fn build_hamiltonian(params: &PyModelParams) -> Vec<Vec<Complex64>> {
    let h = core::build_hamiltonian(&params.inner);
    let m = h.matrix();
    (0..h.dimension()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[pyfunction]
fn eigenvalues(params: &PyModelParams) -> PyResult<Vec<f64>> {
    let spectrum = core::eigendecompose(&core::build_hamiltonian(&params.inner)).map_err(to_py)?;
    Ok(spectrum.eigenvalues.as_slice().to_vec())
}

#[pyfunction]
fn time_grid(t_start: f64, t_end: f64, samples: usize) -> PyResult<Vec<f64>> {
    core::time_grid(t_start, t_end, samples).map_err(to_py)
}

/// Evolves an excitation starting on impurity `start` (`"a"` or `"b"`).
#[pyfunction]
#[pyo3(signature = (params, times, start = "a"))]
fn evolve(py: Python<'_>, params: &PyModelParams, times: Vec<f64>, start: &str) -> PyResult<PyTrajectory> {
    let p = &params.inner;
    let initial = match start {
        "a" | "A" => core::SingleExcitationState::on_a(p),
        "b" | "B" => core::SingleExcitationState::on_b(p),
        other => return Err(PyValueError::new_err(format!("start must be 'a' or 'b', got {other:?}"))),
    };
    let inner = py.detach(|| core::evolve(p, &initial, &times)).map_err(to_py)?;
    Ok(PyTrajectory { inner })
}

#[pyfunction]
fn find_poles(py: Python<'_>, params: &PyModelParams) -> PyResult<Vec<PyPole>> {
    let poles = py.detach(|| core::find_poles(&params.inner)).map_err(to_py)?;
    Ok(poles
        .iter()
        .map(|p| PyPole {
            omega: p.omega,
            parity: p.parity.name(),
            residue_weight: p.residue_weight,
        })
        .collect())
}

/// Impurity amplitudes `(a_A(t), a_B(t))` rebuilt from the pole expansion.
#[pyfunction]
fn reconstruct_amplitudes(params: &PyModelParams, times: Vec<f64>) -> PyResult<(Vec<Complex64>, Vec<Complex64>)> {
    let poles = core::find_poles(&params.inner).map_err(to_py)?;
    core::reconstruct_amplitudes(&poles, &times).map_err(to_py)
}

/// Self-energy `Λ_d(ω)` as a direct mode sum; `omega` may be complex.
#[pyfunction]
fn lambda_sum(d: i64, omega: Complex64, params: &PyModelParams) -> PyResult<Complex64> {
    core::lambda_sum(d, omega, &params.inner).map_err(to_py)
}

#[pyfunction]
fn lambda_closed(d: i64, omega: f64, params: &PyModelParams) -> PyResult<f64> {
    core::lambda_closed(d, omega, &params.inner).map_err(to_py)
}

#[pyfunction]
fn lambda_continuum(d: i64, omega: f64, g: f64) -> PyResult<f64> {
    core::lambda_continuum(d, omega, g).map_err(to_py)
}

#[pyfunction]
fn predict_weak_offres(params: &PyModelParams) -> PyResult<PyRabi> {
    let r = core::predict_weak_offres(&params.inner).map_err(to_py)?;
    Ok(PyRabi {
        omega_plus: r.omega_plus,
        omega_minus: r.omega_minus,
        omega_plus_continuum: r.omega_plus_continuum,
        omega_minus_continuum: r.omega_minus_continuum,
        rabi_period: r.rabi_period(),
    })
}

#[pyfunction]
#[pyo3(signature = (params, resonance_tolerance = core::regimes::DEFAULT_RESONANCE_TOLERANCE))]
fn predict_weak_resonant(params: &PyModelParams, resonance_tolerance: f64) -> PyResult<PyResonant> {
    let r = core::predict_weak_resonant(&params.inner, resonance_tolerance).map_err(to_py)?;
    Ok(PyResonant {
        gamma_big: r.gamma_big,
        resonant_energy: r.resonant_energy,
        delta_closed: tuple4(r.delta_closed),
        delta_polished: tuple4(r.delta_polished),
        regime_flag: r.regime_flag.name(),
        t_star: r.t_star(),
    })
}

#[pyfunction]
fn predict_strong(params: &PyModelParams) -> PyStrong {
    let s = core::predict_strong(&params.inner);
    PyStrong {
        fast_freq: s.fast_freq,
        slow_freq: s.slow_freq,
    }
}

/// Classifies the dynamical regime; `thresholds` is `(discrete, diffusive, strong)`.
#[pyfunction]
#[pyo3(signature = (params, thresholds = None))]
fn classify_regime(params: &PyModelParams, thresholds: Option<(f64, f64, f64)>) -> PyResult<PyRegimeReport> {
    let t = match thresholds {
        Some((discrete, diffusive, strong)) => core::Thresholds::new(discrete, diffusive, strong).map_err(to_py)?,
        None => core::Thresholds::default(),
    };
    let report = core::classify_regime(&params.inner, &t);
    let d = report.diagnostics;
    Ok(PyRegimeReport {
        regime: report.regime.name(),
        g_sqrt_n: d.g_sqrt_n,
        abs_omega: d.abs_omega,
        outside_band: d.outside_band,
        resonance_offset: d.resonance_offset,
        nearest_energy: d.nearest_energy,
        resonant: d.resonant,
    })
}

#[pymodule]
fn qst_channel(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyPole>()?;
    m.add_class::<PyRabi>()?;
    m.add_class::<PyResonant>()?;
    m.add_class::<PyStrong>()?;
    m.add_class::<PyRegimeReport>()?;
    m.add_function(wrap_pyfunction!(build_hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(time_grid, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(find_poles, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_amplitudes, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_sum, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_closed, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_continuum, m)?)?;
    m.add_function(wrap_pyfunction!(predict_weak_offres, m)?)?;
    m.add_function(wrap_pyfunction!(predict_weak_resonant, m)?)?;
    m.add_function(wrap_pyfunction!(predict_strong, m)?)?;
    m.add_function(wrap_pyfunction!(classify_regime, m)?)?;
    Ok(())
}
