//! Python bindings: configuration, simulation, sweeps, error reports and the
//! verification suite.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use daqs::cli::{self, SweepAxis};
use daqs::config::{self, RunConfig};
use daqs::error_bounds::error_report;
use daqs::hamiltonians::{dicke, ModelParams};
use daqs::verify::{run_checks, Builders};
use daqs::{HilbertSpace, StateVector};

fn to_py(e: daqs::Error) -> PyErr {
    if e.is_config_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// A run configuration (flat TOML keys).
#[pyclass(name = "RunConfig", module = "daqs_py", from_py_object)]
#[derive(Clone)]
pub struct PyRunConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyRunConfig {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        RunConfig::from_toml_str(text)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        config::preset(name)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    /// Every member of a named preset.
    #[staticmethod]
    fn preset_family(name: &str) -> PyResult<Vec<Self>> {
        Ok(config::preset_family(name)
            .map_err(to_py)?
            .into_iter()
            .map(|inner| Self { inner })
            .collect())
    }

    /// Copy with one key replaced; `value` is a TOML literal.
    fn with_key(&self, key: &str, value: &str) -> PyResult<Self> {
        self.inner
            .with_key(key, value)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    fn schedule_dump(&self) -> PyResult<String> {
        let r = self.inner.resolve().map_err(to_py)?;
        Ok(r.schedule().map_err(to_py)?.dump())
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.inner.n_qubits
    }

    #[getter]
    fn n_trotter(&self) -> usize {
        self.inner.n_trotter
    }

    fn __repr__(&self) -> String {
        format!(
            "RunConfig({:?}, N={}, n={})",
            self.inner.model, self.inner.n_qubits, self.inner.n_trotter
        )
    }
}

/// Run a configuration and return its time series as a dict of lists.
#[pyfunction]
fn simulate<'py>(py: Python<'py>, cfg: &PyRunConfig) -> PyResult<Bound<'py, PyDict>> {
    let inner = cfg.inner.clone();
    let r = py.detach(move || cli::simulate(&inner)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item(
        "t_sim",
        r.time_grid.iter().map(|t| t.t_sim).collect::<Vec<_>>(),
    )?;
    d.set_item("g_t", r.time_grid.iter().map(|t| t.g_t).collect::<Vec<_>>())?;
    d.set_item("fidelity", r.fidelity)?;
    d.set_item("n_photon_trotter", r.photon_number_trotter)?;
    d.set_item("n_photon_ideal", r.photon_number_ideal)?;
    d.set_item("survival", r.survival)?;
    d.set_item("leakage", r.leakage)?;
    d.set_item("trace_error", r.trace_error)?;
    Ok(d)
}

/// Run and render the CSV the command-line tool would write.
#[pyfunction]
#[pyo3(signature = (cfg, reproducible = true))]
fn run_csv(py: Python<'_>, cfg: &PyRunConfig, reproducible: bool) -> PyResult<String> {
    let inner = cfg.inner.clone();
    py.detach(move || cli::simulate(&inner).and_then(|r| cli::render_run(&inner, &r, reproducible)))
        .map_err(to_py)
}

/// Noiseless digital error of a configuration against its bound.
#[pyfunction]
fn error_bound_report<'py>(py: Python<'py>, cfg: &PyRunConfig) -> PyResult<Bound<'py, PyDict>> {
    let r = cfg.inner.resolve().map_err(to_py)?;
    let rep = py
        .detach(|| {
            r.schedule()
                .and_then(|s| error_report(&s, &StateVector::ground(r.space)))
        })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("variant", rep.variant.name())?;
    d.set_item("n_steps", rep.n_steps)?;
    d.set_item("t", rep.t)?;
    d.set_item("leading_term_norm", rep.leading_term_norm)?;
    d.set_item("cauchy_schwarz_bound", rep.cauchy_schwarz_bound)?;
    d.set_item("measured_error", rep.measured_error)?;
    d.set_item("metric", rep.metric)?;
    d.set_item("infidelity", rep.infidelity)?;
    d.set_item("operator_distance", rep.operator_distance)?;
    d.set_item("restriction_level", rep.restriction_level)?;
    Ok(d)
}

/// Sweep `axis` ("n_trotter", "N" or "coupling") over `values`.
#[pyfunction]
#[pyo3(signature = (cfg, axis, values, workers = None))]
fn sweep<'py>(
    py: Python<'py>,
    cfg: &PyRunConfig,
    axis: &str,
    values: Vec<String>,
    workers: Option<usize>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let axis = match axis {
        "n_trotter" => SweepAxis::NTrotter,
        "N" | "n_qubits" => SweepAxis::NQubits,
        "coupling" => SweepAxis::Coupling,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown sweep axis {other:?}"
            )))
        }
    };
    let k = cli::worker_count(workers).map_err(to_py)?;
    let inner = cfg.inner.clone();
    let rows = py
        .detach(move || cli::sweep(&inner, axis, &values, k))
        .map_err(to_py)?;
    rows.into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("value", r.value)?;
            d.set_item("final_fidelity", r.final_fidelity)?;
            d.set_item("measured_error", r.measured_error)?;
            d.set_item("bound", r.bound)?;
            Ok(d)
        })
        .collect()
}

/// Dense Dicke Hamiltonian as nested lists of complex numbers.
#[pyfunction]
fn dicke_hamiltonian(
    n_qubits: usize,
    fock_cutoff: usize,
    qubit_freq: f64,
    mode_freq: f64,
    coupling: f64,
) -> PyResult<Vec<Vec<num_complex::Complex64>>> {
    let s = HilbertSpace::new(n_qubits, fock_cutoff).map_err(to_py)?;
    let h = dicke(
        s,
        &ModelParams::dicke(n_qubits, qubit_freq, mode_freq, coupling),
    )
    .map_err(to_py)?;
    let m = h.matrix();
    Ok((0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect())
}

/// `(module, name, measured, threshold, passed)`.
type CheckRow = (String, String, f64, f64, bool);

/// Invariant suite as a list of check rows.
#[pyfunction]
#[pyo3(signature = (filter = None))]
fn verify(filter: Option<&str>) -> PyResult<Vec<CheckRow>> {
    let checks = run_checks(filter, &Builders::default()).map_err(to_py)?;
    Ok(checks
        .into_iter()
        .map(|c| {
            (
                c.module.to_string(),
                c.name.clone(),
                c.measured,
                c.threshold,
                c.passed(),
            )
        })
        .collect())
}

#[pymodule]
fn daqs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRunConfig>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_csv, m)?)?;
    m.add_function(wrap_pyfunction!(error_bound_report, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(dicke_hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("PRESETS", config::PRESETS.to_vec())?;
    Ok(())
}
