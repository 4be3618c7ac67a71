//! Python bindings for the simulator: specs, pipeline runners, and the
//! classical cross-check helpers, importable as `circsim`.
//!
//! States cross the boundary as plain lists of Python complex numbers
//! (least significant qubit first), so results drop straight into numpy.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use circulant_sim::arith::Backend;
use circulant_sim::circulant::{self, BlockKind};
use circulant_sim::cyclic;
use circulant_sim::dense::{self, SignMode};
use circulant_sim::hamsim;
use circulant_sim::hhl::{self, InversionBackend, InversionPlan};
use circulant_sim::oracle::AmplitudeOracle;
use circulant_sim::product;
use circulant_sim::state::StateVector;
use circulant_sim::SimError;

fn err(e: SimError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_backend(name: &str) -> PyResult<Backend> {
    match name {
        "gate" => Ok(Backend::GateLevel),
        "perm" => Ok(Backend::Fast),
        other => Err(PyValueError::new_err(format!(
            "backend must be 'gate' or 'perm', got '{other}'"
        ))),
    }
}

fn parse_sign(name: &str) -> PyResult<SignMode> {
    match name {
        "plain" => Ok(SignMode::Plain),
        "negate_v0" => Ok(SignMode::NegateV0),
        other => Err(PyValueError::new_err(format!(
            "sign_mode must be 'plain' or 'negate_v0', got '{other}'"
        ))),
    }
}

fn state_from(amps: Vec<Complex64>) -> PyResult<StateVector> {
    StateVector::from_amplitudes(amps).map_err(err)
}

fn rows(m: &dense::DenseOperator) -> Vec<Vec<Complex64>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m.get(i, j)).collect())
        .collect()
}

/// Circulant operator description: weights, sign handling, and the dense
/// and spectral views used for cross-checks.
#[pyclass(name = "CirculantSpec", from_py_object)]
#[derive(Clone)]
struct PyCirculantSpec {
    inner: circulant::CirculantSpec,
}

#[pymethods]
impl PyCirculantSpec {
    #[new]
    #[pyo3(signature = (weights, sign_mode = "plain"))]
    fn new(weights: Vec<f64>, sign_mode: &str) -> PyResult<Self> {
        let inner =
            circulant::CirculantSpec::new(&weights, parse_sign(sign_mode)?).map_err(err)?;
        Ok(PyCirculantSpec { inner })
    }

    /// Normalized weights (they sum to one; `scale` holds the factor).
    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    fn eigenvalues(&self) -> Vec<Complex64> {
        self.inner.eigenvalues()
    }

    fn condition_number(&self) -> f64 {
        self.inner.condition_number()
    }

    fn is_hermitian(&self) -> bool {
        self.inner.is_hermitian()
    }

    fn dense(&self) -> Vec<Vec<Complex64>> {
        rows(&self.inner.dense())
    }

    fn __repr__(&self) -> String {
        format!(
            "CirculantSpec(dim={}, scale={:.6}, kappa={:.6})",
            self.inner.dim(),
            self.inner.scale(),
            self.inner.condition_number()
        )
    }
}

/// Banded (Toeplitz/Hankel) parameter vector `t_{-(N-1)} .. t_{N-1}`.
#[pyclass(name = "BandedSpec", from_py_object)]
#[derive(Clone)]
struct PyBandedSpec {
    inner: circulant::BandedSpec,
}

#[pymethods]
impl PyBandedSpec {
    #[new]
    fn new(band: Vec<f64>) -> PyResult<Self> {
        let inner = circulant::BandedSpec::new(&band).map_err(err)?;
        Ok(PyBandedSpec { inner })
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    fn dense_toeplitz(&self) -> Vec<Vec<Complex64>> {
        rows(&self.inner.dense_toeplitz())
    }

    fn dense_hankel(&self) -> Vec<Vec<Complex64>> {
        rows(&self.inner.dense_hankel())
    }
}

/// Post-selected pipeline outcome.
#[pyclass(name = "ApplyResult")]
struct PyApplyResult {
    /// Normalized output state.
    #[pyo3(get)]
    output: Vec<Complex64>,
    #[pyo3(get)]
    success_probability: f64,
    /// Input normalization factor; multiply the unnormalized output by it
    /// to undo the weight scaling.
    #[pyo3(get)]
    scale: f64,
    #[pyo3(get)]
    oracle_calls: u64,
}

impl From<circulant::ApplyOutcome> for PyApplyResult {
    fn from(out: circulant::ApplyOutcome) -> Self {
        PyApplyResult {
            output: out.output.amplitudes().to_vec(),
            success_probability: out.success_probability,
            scale: out.scale,
            oracle_calls: out.oracle_calls,
        }
    }
}

/// Apply the circulant to a state; `amplify` runs that many rounds of
/// amplitude amplification with the input re-prepared from `psi`.
#[pyfunction]
#[pyo3(signature = (spec, psi, backend = "perm", amplify = None))]
fn apply_circulant(
    spec: &PyCirculantSpec,
    psi: Vec<Complex64>,
    backend: &str,
    amplify: Option<usize>,
) -> PyResult<PyApplyResult> {
    let state = state_from(psi)?;
    let backend = parse_backend(backend)?;
    let out = match amplify {
        None => circulant::apply_circulant(&spec.inner, &state, None, None, backend),
        Some(n) => {
            let oracle = AmplitudeOracle::for_amplitudes(state.amplitudes()).map_err(err)?;
            circulant::apply_circulant(&spec.inner, &state, Some(n), Some(&oracle), backend)
        }
    }
    .map_err(err)?;
    Ok(out.into())
}

#[pyfunction]
#[pyo3(signature = (spec, psi, backend = "perm"))]
fn apply_toeplitz(spec: &PyBandedSpec, psi: Vec<Complex64>, backend: &str) -> PyResult<PyApplyResult> {
    let state = state_from(psi)?;
    let out = circulant::apply_toeplitz(&spec.inner, &state, None, None, parse_backend(backend)?)
        .map_err(err)?;
    Ok(out.into())
}

#[pyfunction]
#[pyo3(signature = (spec, psi, backend = "perm"))]
fn apply_hankel(spec: &PyBandedSpec, psi: Vec<Complex64>, backend: &str) -> PyResult<PyApplyResult> {
    let state = state_from(psi)?;
    let out = circulant::apply_hankel(&spec.inner, &state, None, None, parse_backend(backend)?)
        .map_err(err)?;
    Ok(out.into())
}

/// Block-circulant application with per-shift phase factors `e^{i theta j}`.
#[pyfunction]
#[pyo3(signature = (weights, theta, psi, backend = "perm"))]
fn apply_phase_blocks(
    weights: Vec<f64>,
    theta: f64,
    psi: Vec<Complex64>,
    backend: &str,
) -> PyResult<PyApplyResult> {
    let spec = circulant::UbSpec::new(&weights, BlockKind::PhaseRule(theta)).map_err(err)?;
    let state = state_from(psi)?;
    let out = circulant::apply_block_ub(&spec, &state, parse_backend(backend)?).map_err(err)?;
    Ok(out.into())
}

/// Evolution outcome under `e^{-iCt}`.
#[pyclass(name = "EvolutionResult")]
struct PyEvolutionResult {
    #[pyo3(get)]
    output: Vec<Complex64>,
    #[pyo3(get)]
    survival_weight: f64,
    #[pyo3(get)]
    segments: usize,
    #[pyo3(get)]
    order: usize,
    #[pyo3(get)]
    calls_per_direction: u64,
}

#[pyfunction]
fn simulate_evolution(
    spec: &PyCirculantSpec,
    psi: Vec<Complex64>,
    time: f64,
    epsilon: f64,
) -> PyResult<PyEvolutionResult> {
    let state = state_from(psi)?;
    let out = hamsim::simulate_evolution(&spec.inner, &state, time, epsilon).map_err(err)?;
    Ok(PyEvolutionResult {
        output: out.output.amplitudes().to_vec(),
        survival_weight: out.survival_weight,
        segments: out.plan.segments,
        order: out.plan.order,
        calls_per_direction: out.calls_per_direction,
    })
}

/// Linear-system solution outcome.
#[pyclass(name = "InversionResult")]
struct PyInversionResult {
    #[pyo3(get)]
    output: Vec<Complex64>,
    #[pyo3(get)]
    success_probability: f64,
    #[pyo3(get)]
    kappa: f64,
    #[pyo3(get)]
    phase_bits: usize,
    #[pyo3(get)]
    clamped_branches: u64,
}

#[pyfunction]
#[pyo3(signature = (spec, psi, epsilon = 0.05, method = "exact"))]
fn invert_circulant(
    spec: &PyCirculantSpec,
    psi: Vec<Complex64>,
    epsilon: f64,
    method: &str,
) -> PyResult<PyInversionResult> {
    let backend = match method {
        "exact" => InversionBackend::ExactDiagonal,
        "taylor" => InversionBackend::Taylor,
        other => {
            return Err(PyValueError::new_err(format!(
                "method must be 'exact' or 'taylor', got '{other}'"
            )))
        }
    };
    let state = state_from(psi)?;
    let plan = InversionPlan::for_spec(&spec.inner, epsilon, backend).map_err(err)?;
    let out = hhl::invert_circulant(&spec.inner, &state, &plan).map_err(err)?;
    Ok(PyInversionResult {
        output: out.output.amplitudes().to_vec(),
        success_probability: out.success_probability,
        kappa: plan.kappa,
        phase_bits: plan.phase_bits,
        clamped_branches: out.clamped_branches,
    })
}

/// Apply a product of circulants through one shared pipeline.
#[pyfunction]
#[pyo3(signature = (specs, psi, backend = "perm"))]
fn apply_product(
    specs: Vec<PyCirculantSpec>,
    psi: Vec<Complex64>,
    backend: &str,
) -> PyResult<PyApplyResult> {
    let inner: Vec<circulant::CirculantSpec> = specs.into_iter().map(|s| s.inner).collect();
    let state = state_from(psi)?;
    let out = product::apply_product_circulant(&inner, &state, parse_backend(backend)?)
        .map_err(err)?;
    Ok(out.into())
}

/// Measured index-register marginals of the product oracle.
#[pyfunction]
#[pyo3(signature = (specs, backend = "perm"))]
fn product_marginals(specs: Vec<PyCirculantSpec>, backend: &str) -> PyResult<Vec<f64>> {
    let inner: Vec<circulant::CirculantSpec> = specs.into_iter().map(|s| s.inner).collect();
    product::ProductOracle::from_specs(&inner)
        .map_err(err)?
        .marginals(parse_backend(backend)?)
        .map_err(err)
}

/// Steady-state solution of a cyclic vibration system.
#[pyclass(name = "CyclicResult")]
struct PyCyclicResult {
    #[pyo3(get)]
    state: Vec<Complex64>,
    #[pyo3(get)]
    magnitude: f64,
    #[pyo3(get)]
    phase: f64,
    #[pyo3(get)]
    residual: f64,
    #[pyo3(get)]
    success_probability: f64,
    #[pyo3(get)]
    condition_number: f64,
    #[pyo3(get)]
    sign_case: String,
    #[pyo3(get)]
    weak_coupling: bool,
}

#[pyfunction]
#[pyo3(signature = (stiffness_row, excitation_order, omega, force_amplitude, epsilon = 0.01))]
fn solve_cyclic(
    stiffness_row: Vec<f64>,
    excitation_order: i64,
    omega: f64,
    force_amplitude: Complex64,
    epsilon: f64,
) -> PyResult<PyCyclicResult> {
    let sys = cyclic::CyclicSystemSpec {
        stiffness_row,
        excitation_order,
        omega,
        force_amplitude: [force_amplitude.re, force_amplitude.im],
    };
    let sol = cyclic::solve_cyclic(&sys, epsilon, None, None).map_err(err)?;
    Ok(PyCyclicResult {
        state: sol.state.amplitudes().to_vec(),
        magnitude: sol.magnitude,
        phase: sol.phase,
        residual: sol.residual,
        success_probability: sol.success_probability,
        condition_number: sol.condition_number,
        sign_case: format!("{:?}", sol.case),
        weak_coupling: sol.weak_coupling,
    })
}

#[pyfunction]
fn travelling_wave_force(width: usize, order: i64, amplitude: Complex64) -> PyResult<Vec<Complex64>> {
    Ok(cyclic::travelling_wave_force(width, order, amplitude)
        .map_err(err)?
        .amplitudes()
        .to_vec())
}

/// Two-qubit-and-finer gate totals of the in-place adder per register width.
#[pyfunction]
fn adder_gate_counts(widths: Vec<usize>) -> PyResult<Vec<(usize, u64)>> {
    circulant_sim::arith::adder_gate_counts(widths).map_err(err)
}

#[pyfunction]
fn fitted_exponent(points: Vec<(usize, u64)>) -> f64 {
    circulant_sim::arith::fitted_exponent(&points)
}

#[pyfunction]
fn cyclic_convolution(a: Vec<f64>, b: Vec<f64>) -> PyResult<Vec<f64>> {
    dense::cyclic_convolution(&a, &b).map_err(err)
}

#[pymodule]
fn circsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCirculantSpec>()?;
    m.add_class::<PyBandedSpec>()?;
    m.add_class::<PyApplyResult>()?;
    m.add_class::<PyEvolutionResult>()?;
    m.add_class::<PyInversionResult>()?;
    m.add_class::<PyCyclicResult>()?;
    m.add_function(wrap_pyfunction!(apply_circulant, m)?)?;
    m.add_function(wrap_pyfunction!(apply_toeplitz, m)?)?;
    m.add_function(wrap_pyfunction!(apply_hankel, m)?)?;
    m.add_function(wrap_pyfunction!(apply_phase_blocks, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_evolution, m)?)?;
    m.add_function(wrap_pyfunction!(invert_circulant, m)?)?;
    m.add_function(wrap_pyfunction!(apply_product, m)?)?;
    m.add_function(wrap_pyfunction!(product_marginals, m)?)?;
    m.add_function(wrap_pyfunction!(solve_cyclic, m)?)?;
    m.add_function(wrap_pyfunction!(travelling_wave_force, m)?)?;
    m.add_function(wrap_pyfunction!(adder_gate_counts, m)?)?;
    m.add_function(wrap_pyfunction!(fitted_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(cyclic_convolution, m)?)?;
    Ok(())
}
