//! Python bindings: parse a circuit, solve the master equation, run Monte
//! Carlo ensembles and emit LTspice netlists. Results come back as plain
//! lists so they drop straight into numpy or pandas.

use memnet::master::{
    generator_matrix, linspace, solve_dc, solve_transient, ProbabilityTrajectory, ProbabilityVector, TransientOptions,
    DEFAULT_SAMPLES, DEFAULT_TOL,
};
use memnet::mcsim::{mc_ensemble, EnsembleOptions, Sampler};
use memnet::netdsl::{format_circuit, parse_circuit, CircuitSpec, Waveform};
use memnet::observables::{
    closed_form_chain_length, mean_switching_time_numeric, switching_time_stages, ObservableSeries,
};
use memnet::spicegen::{emit_ltspice, TranSettings};
use memnet::statespace::{enumerate_states, lump_states, StateSpace};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: memnet::Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Probabilities and observables sampled on a time grid.
#[pyclass(frozen, get_all, module = "pymemnet")]
pub struct Trajectory {
    times: Vec<f64>,
    labels: Vec<String>,
    /// One row per time, one column per state.
    probabilities: Vec<Vec<f64>>,
    source_voltage: Vec<f64>,
    mean_current: Vec<f64>,
    switch_time_accumulator: Vec<f64>,
}

impl Trajectory {
    fn new(traj: &ProbabilityTrajectory, space: &StateSpace) -> Self {
        let obs = ObservableSeries::from_trajectory(traj, space);
        Self {
            times: traj.times.clone(),
            labels: space.labels(),
            probabilities: traj.probabilities.iter().map(|p| p.0.clone()).collect(),
            source_voltage: obs.source_voltage,
            mean_current: obs.mean_current,
            switch_time_accumulator: obs.switch_time_accumulator,
        }
    }
}

#[pymethods]
impl Trajectory {
    fn __len__(&self) -> usize {
        self.times.len()
    }

    /// Occupation probability of one state over time.
    fn series(&self, label: &str) -> PyResult<Vec<f64>> {
        let k = self
            .labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| PyValueError::new_err(format!("no state labelled {label}")))?;
        Ok(self.probabilities.iter().map(|p| p[k]).collect())
    }
}

/// Monte Carlo ensemble statistics at the report times.
#[pyclass(frozen, get_all, module = "pymemnet")]
pub struct Ensemble {
    trials: usize,
    times: Vec<f64>,
    labels: Vec<String>,
    probabilities: Vec<Vec<f64>>,
    mean_current: Vec<f64>,
    current_stderr: Vec<f64>,
    /// First passage into all-on per trial, `None` if it never happened.
    switching_times: Vec<Option<f64>>,
}

#[pymethods]
impl Ensemble {
    /// `(mean, standard error, count)` over trials that reached all-on.
    fn switching_time_summary(&self) -> (f64, f64, usize) {
        let hit: Vec<f64> = self.switching_times.iter().flatten().copied().collect();
        let (mean, se) = memnet::stats::mean_and_stderr(&hit);
        (mean, se, hit.len())
    }
}

/// A parsed circuit description.
#[pyclass(frozen, module = "pymemnet")]
pub struct Circuit {
    spec: CircuitSpec,
}

impl Circuit {
    fn space(&self, full_space: bool) -> PyResult<StateSpace> {
        let full = enumerate_states(&self.spec).map_err(to_py)?;
        Ok(if full_space { full } else { lump_states(&full, &self.spec) })
    }
}

#[pymethods]
impl Circuit {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(Self { spec: parse_circuit(text).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_file(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| PyValueError::new_err(format!("cannot read {}: {e}", path.display())))?;
        Self::new(&text)
    }

    fn __str__(&self) -> String {
        format_circuit(&self.spec)
    }

    fn __repr__(&self) -> String {
        format!("Circuit({} memristors, {:?})", self.spec.instances.len(), self.spec.source)
    }

    #[getter]
    fn is_dc(&self) -> bool {
        self.spec.source.is_dc()
    }

    #[getter]
    fn amplitude(&self) -> f64 {
        self.spec.source.amplitude()
    }

    /// Same circuit with the sine source retuned to `freq` Hz.
    fn with_frequency(&self, freq: f64) -> PyResult<Self> {
        if self.spec.source.is_dc() || !(freq > 0.0 && freq.is_finite()) {
            return Err(PyValueError::new_err("with_frequency needs a sine source and a positive frequency"));
        }
        let mut spec = self.spec.clone();
        spec.source = spec.source.with_frequency(freq);
        Ok(Self { spec })
    }

    #[pyo3(signature = (full_space = false))]
    fn labels(&self, full_space: bool) -> PyResult<Vec<String>> {
        Ok(self.space(full_space)?.labels())
    }

    /// Generator matrix at source voltage `v`, row-major (`q[a][b]` = rate b -> a).
    #[pyo3(signature = (v, full_space = false))]
    fn generator(&self, v: f64, full_space: bool) -> PyResult<Vec<Vec<f64>>> {
        let space = self.space(full_space)?;
        let q = generator_matrix(&space, v).map_err(to_py)?;
        let n = q.dim();
        Ok(q.to_dense().chunks(n).map(<[f64]>::to_vec).collect())
    }

    /// Solve the master equation from the declared initial state up to `t_stop`.
    #[pyo3(signature = (t_stop, samples = DEFAULT_SAMPLES, tol = DEFAULT_TOL, full_space = false))]
    fn simulate(
        &self,
        py: Python<'_>,
        t_stop: f64,
        samples: usize,
        tol: f64,
        full_space: bool,
    ) -> PyResult<Trajectory> {
        let space = self.space(full_space)?;
        let p0 = ProbabilityVector::initial(&space, &self.spec);
        let spec = &self.spec;
        let traj = py
            .detach(|| match spec.source {
                Waveform::Dc { amplitude } => solve_dc(&space, amplitude, &p0, &linspace(t_stop, samples)),
                wave => solve_transient(
                    &space,
                    &wave,
                    &p0,
                    t_stop,
                    &TransientOptions { tol, samples, ..Default::default() },
                ),
            })
            .map_err(to_py)?;
        Ok(Trajectory::new(&traj, &space))
    }

    /// Constant-drive solution at arbitrary increasing times (the source amplitude is the drive).
    #[pyo3(signature = (times, full_space = false))]
    fn solve_dc(&self, py: Python<'_>, times: Vec<f64>, full_space: bool) -> PyResult<Trajectory> {
        let space = self.space(full_space)?;
        let p0 = ProbabilityVector::initial(&space, &self.spec);
        let v = self.spec.source.amplitude();
        let traj = py.detach(|| solve_dc(&space, v, &p0, &times)).map_err(to_py)?;
        Ok(Trajectory::new(&traj, &space))
    }

    /// Per-stage waiting times of the closed form (series chains of identical binary devices).
    fn switching_time_stages(&self) -> PyResult<Vec<f64>> {
        let Waveform::Dc { amplitude } = self.spec.source else {
            return Err(PyRuntimeError::new_err("closed form needs a dc source"));
        };
        let n = closed_form_chain_length(&self.spec).map_err(to_py)?;
        switching_time_stages(n, self.spec.instance_model(0), amplitude).map_err(to_py)
    }

    fn analytic_switching_time(&self) -> PyResult<f64> {
        Ok(self.switching_time_stages()?.iter().sum())
    }

    /// Mean switching time from the solved trajectory: `(mean, tail correction)`.
    #[pyo3(signature = (t_stop, samples = 20001))]
    fn numeric_switching_time(&self, py: Python<'_>, t_stop: f64, samples: usize) -> PyResult<(f64, f64)> {
        let Waveform::Dc { amplitude } = self.spec.source else {
            return Err(PyRuntimeError::new_err("switching time needs a dc source"));
        };
        let space = self.space(false)?;
        let p0 = ProbabilityVector::initial(&space, &self.spec);
        let est = py
            .detach(|| {
                let traj = solve_dc(&space, amplitude, &p0, &linspace(t_stop, samples))?;
                mean_switching_time_numeric(&traj, &space)
            })
            .map_err(to_py)?;
        Ok((est.mean, est.tail_correction))
    }

    /// Ensemble of stochastic histories. Without `dt`, dc circuits use the
    /// exact event-driven sampler; otherwise fixed steps of `dt` seconds.
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (t_stop, trials = 1000, seed = 0, samples = 101, dt = None, full_space = false))]
    fn monte_carlo(
        &self,
        py: Python<'_>,
        t_stop: f64,
        trials: usize,
        seed: u64,
        samples: usize,
        dt: Option<f64>,
        full_space: bool,
    ) -> PyResult<Ensemble> {
        let sampler = match (self.spec.source, dt) {
            (Waveform::Dc { .. }, None) => Sampler::Gillespie,
            (_, dt) => Sampler::FixedStep { dt: dt.unwrap_or(t_stop / 1e5) },
        };
        let opts = EnsembleOptions { trials, seed, report_times: linspace(t_stop, samples), sampler, full_space };
        let spec = &self.spec;
        let stats = py.detach(|| mc_ensemble(spec, &spec.source, &opts)).map_err(to_py)?;
        Ok(Ensemble {
            trials: stats.trials,
            times: stats.report_times,
            labels: stats.labels,
            probabilities: stats.empirical_p,
            mean_current: stats.mean_current,
            current_stderr: stats.current_stderr,
            switching_times: stats.switching_times,
        })
    }

    /// LTspice netlist implementing the master equation.
    #[pyo3(signature = (t_stop, t_start = 0.0, max_step = None, title = None, full_space = false))]
    fn emit_spice(
        &self,
        t_stop: f64,
        t_start: f64,
        max_step: Option<f64>,
        title: Option<&str>,
        full_space: bool,
    ) -> PyResult<String> {
        let space = self.space(full_space)?;
        let tran = TranSettings { t_stop, t_start, max_step: max_step.unwrap_or(t_stop / 1e5) };
        Ok(emit_ltspice(&space, &self.spec, &self.spec.source, &tran, title).map_err(to_py)?.text())
    }
}

/// Do two netlists describe the same circuit, up to ordering and formatting?
#[pyfunction]
fn netlists_equivalent(a: &str, b: &str) -> PyResult<bool> {
    memnet::spicegen::netlists_equivalent(a, b).map_err(to_py)
}

/// Structural problems found in a generated netlist.
#[pyfunction]
fn lint_netlist(text: &str) -> Vec<String> {
    memnet::spicegen::lint(text).into_iter().map(|i| i.0).collect()
}

#[pymodule]
fn pymemnet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Circuit>()?;
    m.add_class::<Trajectory>()?;
    m.add_class::<Ensemble>()?;
    m.add_function(wrap_pyfunction!(netlists_equivalent, m)?)?;
    m.add_function(wrap_pyfunction!(lint_netlist, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
