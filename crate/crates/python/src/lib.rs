//! Python bindings. Structured results cross the boundary as plain dicts and lists.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use probespec::analytic::{self, TransitionTable};
use probespec::evolution::Method;
use probespec::model::{ProbeParameters, SystemHamiltonian, DEFAULT_ALPHA, DEFAULT_COUPLING, DEFAULT_TAU};
use probespec::operators::ComplexMatrix;
use probespec::oracle::{compare_spectrum, diagonalize_system, explain_misses, DetectionContext};
use probespec::spectroscopy::{
    detect_peaks, effective_threshold, make_grid, run_sweep, FrequencyGrid, Measurement, SweepConfig, SweepResult,
    DEFAULT_RELATIVE_THRESHOLD, DEFAULT_THRESHOLD_FLOOR,
};
use probespec::systems::SurrogateSpec;

fn err(e: probespec::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_method(name: &str, slices: usize) -> PyResult<Method> {
    match name {
        "exact" => Ok(Method::Exact),
        "trotter" => Ok(Method::Trotter(slices)),
        "circuit" => Ok(Method::Circuit(slices)),
        other => Err(PyValueError::new_err(format!("unknown method {other:?}; expected exact, trotter or circuit"))),
    }
}

fn table(sys: &SystemHamiltonian, c: f64, alpha: f64) -> PyResult<TransitionTable> {
    Ok(diagonalize_system(sys, alpha).map_err(err)?.transition_table(c))
}

/// Hermitian system Hamiltonian on `n` qubits.
#[pyclass(name = "System", module = "probespec_py", frozen)]
struct PySystem {
    inner: SystemHamiltonian,
}

#[pymethods]
impl PySystem {
    /// Seeded surrogate with eigenvalues in `window`; `overrides` pins `(level, component sum)` pairs.
    #[staticmethod]
    #[pyo3(signature = (qubits, seed = 1, window = None, overrides = None))]
    fn surrogate(qubits: usize, seed: u64, window: Option<(f64, f64)>, overrides: Option<Vec<(usize, f64)>>) -> PyResult<Self> {
        let mut spec = SurrogateSpec::new(qubits, seed);
        if let Some((lo, hi)) = window {
            spec = spec.with_window(lo, hi);
        }
        for (level, sum) in overrides.unwrap_or_default() {
            spec = spec.with_component_sum(level, sum);
        }
        Ok(Self { inner: spec.build().map_err(err)? })
    }

    /// Row-major nested list of complex entries.
    #[staticmethod]
    fn from_matrix(rows: Vec<Vec<Complex64>>) -> PyResult<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(PyValueError::new_err("matrix must be square"));
        }
        let data = rows.into_iter().flatten().collect();
        let inner = SystemHamiltonian::new(ComplexMatrix::from_vec(n, n, data)).map_err(err)?;
        Ok(Self { inner })
    }

    /// Lines of `coefficient WORD`, e.g. `0.5 XZ`.
    #[staticmethod]
    fn from_pauli(text: &str) -> PyResult<Self> {
        Ok(Self { inner: probespec::io::parse_pauli_sum(text).map_err(err)? })
    }

    /// Dimension line followed by rows of `re im` pairs.
    #[staticmethod]
    fn from_dense(text: &str) -> PyResult<Self> {
        Ok(Self { inner: probespec::io::parse_dense_hamiltonian(text).map_err(err)? })
    }

    #[getter]
    fn qubits(&self) -> usize {
        self.inner.qubits()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn matrix(&self) -> Vec<Vec<Complex64>> {
        let m = self.inner.matrix();
        m.as_slice().chunks(m.cols()).map(<[Complex64]>::to_vec).collect()
    }

    fn to_dense(&self) -> String {
        probespec::io::write_dense_hamiltonian(&self.inner)
    }

    /// Per-level energy, component sum, coupling `Q` and resonant probe frequency.
    #[pyo3(signature = (c = DEFAULT_COUPLING, alpha = DEFAULT_ALPHA))]
    fn transitions<'py>(&self, py: Python<'py>, c: f64, alpha: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &table(&self.inner, c, alpha)?.rows)
    }

    fn __repr__(&self) -> String {
        format!("System(qubits={}, dim={})", self.inner.qubits(), self.inner.dim())
    }
}

/// Decay probabilities over a frequency grid.
#[pyclass(name = "Sweep", module = "probespec_py", frozen)]
struct PySweep {
    inner: SweepResult,
}

#[pymethods]
impl PySweep {
    #[getter]
    fn omegas(&self) -> Vec<f64> {
        self.inner.grid.centers()
    }

    #[getter]
    fn decay(&self) -> Vec<f64> {
        self.inner.decay.clone()
    }

    #[getter]
    fn successes(&self) -> Option<Vec<u64>> {
        self.inner.successes.clone()
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.grid.delta()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    /// Detected peaks; `threshold` is relative to the sweep maximum.
    #[pyo3(signature = (threshold = DEFAULT_RELATIVE_THRESHOLD))]
    fn peaks<'py>(&self, py: Python<'py>, threshold: f64) -> PyResult<Bound<'py, PyAny>> {
        let abs = effective_threshold(&self.inner, threshold, DEFAULT_THRESHOLD_FLOOR);
        to_py(py, &detect_peaks(&self.inner, abs))
    }

    /// Matches detected peaks against exact diagonalization and explains every miss.
    #[pyo3(signature = (system, threshold = DEFAULT_RELATIVE_THRESHOLD))]
    fn compare<'py>(&self, py: Python<'py>, system: &PySystem, threshold: f64) -> PyResult<Bound<'py, PyAny>> {
        #[derive(Serialize)]
        struct Out<'a> {
            #[serde(flatten)]
            report: &'a probespec::oracle::ComparisonReport,
            explanations: &'a [probespec::oracle::MissExplanation],
        }
        let r = &self.inner;
        let abs = effective_threshold(r, threshold, DEFAULT_THRESHOLD_FLOOR);
        let peaks = detect_peaks(r, abs);
        let oracle = diagonalize_system(&system.inner, r.config.params.alpha).map_err(err)?;
        let report = compare_spectrum(&peaks, &oracle, r.grid.delta());
        let ctx = DetectionContext {
            c: r.config.params.c,
            tau: r.config.params.tau,
            grid: r.grid,
            threshold: abs,
        };
        let explanations = explain_misses(&report, &oracle, &ctx);
        to_py(py, &Out { report: &report, explanations: &explanations })
    }

    fn __len__(&self) -> usize {
        self.inner.decay.len()
    }
}

fn grid(omega_min: f64, omega_max: f64, intervals: usize) -> PyResult<FrequencyGrid> {
    make_grid(omega_min, omega_max, intervals).map_err(err)
}

/// Simulated sweep. `shots = 0` reports exact marginals.
#[pyfunction]
#[pyo3(signature = (
    system, omega_min, omega_max, intervals, c = DEFAULT_COUPLING, tau = DEFAULT_TAU, alpha = DEFAULT_ALPHA,
    method = "exact", trotter_slices = 64, shots = 0, seed = 0
))]
#[allow(clippy::too_many_arguments)]
fn sweep(
    py: Python<'_>,
    system: &PySystem,
    omega_min: f64,
    omega_max: f64,
    intervals: usize,
    c: f64,
    tau: f64,
    alpha: f64,
    method: &str,
    trotter_slices: usize,
    shots: u64,
    seed: u64,
) -> PyResult<PySweep> {
    let g = grid(omega_min, omega_max, intervals)?;
    let params = ProbeParameters::new(0.0, c, alpha, tau).map_err(err)?;
    let measurement = if shots == 0 { Measurement::ExactMarginal } else { Measurement::Shots { count: shots, seed } };
    let config = SweepConfig::new(params, parse_method(method, trotter_slices)?, measurement).map_err(err)?;
    let sys = &system.inner;
    let inner = py.detach(|| run_sweep(sys, &g, &config)).map_err(err)?;
    Ok(PySweep { inner })
}

/// Closed-form sweep from the two-level model of each transition.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (system, omega_min, omega_max, intervals, c = DEFAULT_COUPLING, tau = DEFAULT_TAU, alpha = DEFAULT_ALPHA))]
fn predicted_sweep<'py>(
    py: Python<'py>,
    system: &PySystem,
    omega_min: f64,
    omega_max: f64,
    intervals: usize,
    c: f64,
    tau: f64,
    alpha: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let t = table(&system.inner, c, alpha)?;
    to_py(py, &analytic::predicted_sweep(&t, &grid(omega_min, omega_max, intervals)?, tau))
}

/// Two-level decay probability for coupling `q`, level `e_j`, reference `e_0`.
#[pyfunction]
fn rabi_decay_probability(q: f64, e_j: f64, e_0: f64, omega: f64, tau: f64) -> PyResult<f64> {
    analytic::rabi_decay_probability(q, e_j, e_0, omega, tau).map_err(err)
}

/// Full width at half maximum of the main lobe of a single line.
#[pyfunction]
fn lineshape_width(q: f64, tau: f64) -> f64 {
    analytic::lineshape_width(q, tau)
}

/// Bound on the decay probability leaked by off-resonant levels.
#[pyfunction]
#[pyo3(signature = (system, c = DEFAULT_COUPLING, alpha = DEFAULT_ALPHA))]
fn off_resonant_error_bound(system: &PySystem, c: f64, alpha: f64) -> PyResult<f64> {
    analytic::off_resonant_error_bound(&table(&system.inner, c, alpha)?, c).map_err(err)
}

/// Runs the built-in self checks; returns `(name, passed, detail)` triples.
#[pyfunction]
#[pyo3(signature = (system, c = DEFAULT_COUPLING, alpha = DEFAULT_ALPHA))]
fn verify(py: Python<'_>, system: &PySystem, c: f64, alpha: f64) -> PyResult<Vec<(String, bool, String)>> {
    let sys = &system.inner;
    let checks = py.detach(|| probespec::verify::run_verification(sys, c, alpha)).map_err(err)?;
    Ok(checks.into_iter().map(|k| (k.name, k.passed, k.detail)).collect())
}

#[pymodule]
fn probespec_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystem>()?;
    m.add_class::<PySweep>()?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(predicted_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(rabi_decay_probability, m)?)?;
    m.add_function(wrap_pyfunction!(lineshape_width, m)?)?;
    m.add_function(wrap_pyfunction!(off_resonant_error_bound, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("DEFAULT_ALPHA", DEFAULT_ALPHA)?;
    m.add("DEFAULT_COUPLING", DEFAULT_COUPLING)?;
    m.add("DEFAULT_TAU", DEFAULT_TAU)?;
    Ok(())
}
