//! Python bindings. Reports come back as plain dicts and lists.

use std::path::PathBuf;

use anderson_lab::estimators::{self as est, MinamiParams, Sampling};
use anderson_lab::harness::{self, ExperimentConfig, HarnessError, Overrides};
use anderson_lab::lattice::{self, DisorderField, DistributionSpec, Lattice};
use anderson_lab::probes::{self, DecouplingParams, SmoothCutoff};
use anderson_lab::spectral::{eigensolve, EnergyInterval};
use anderson_lab::LabError;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

fn lab_err(e: LabError) -> PyErr {
    match e {
        LabError::VolumeCap { .. } | LabError::Io(_) | LabError::NoConvergence { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

fn harness_err(e: HarnessError) -> PyErr {
    match e {
        HarnessError::Config(m) => PyValueError::new_err(m),
        HarnessError::Resource(m) => PyRuntimeError::new_err(m),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

fn sampling(samples: u64, seed: u64, workers: usize) -> Sampling {
    Sampling::new(samples, seed).with_workers(workers)
}

fn intervals(raw: &[(f64, f64)]) -> PyResult<Vec<EnergyInterval>> {
    raw.iter().map(|&(a, b)| EnergyInterval::new(a, b).map_err(lab_err)).collect()
}

/// Periodic box `Λ_L` in `d` dimensions.
#[pyclass(name = "Lattice", frozen)]
struct PyLattice {
    inner: Lattice,
}

#[pymethods]
impl PyLattice {
    #[new]
    #[pyo3(signature = (dim, side, max_volume = 1 << 20))]
    fn new(dim: usize, side: usize, max_volume: usize) -> PyResult<Self> {
        Ok(Self { inner: lattice::build_box(dim, side, None, max_volume).map_err(lab_err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn side(&self) -> usize {
        self.inner.side()
    }

    #[getter]
    fn volume(&self) -> usize {
        self.inner.volume()
    }

    fn zero_site(&self) -> usize {
        self.inner.zero_site()
    }

    fn coords(&self, site: usize) -> PyResult<Vec<i64>> {
        if site >= self.inner.volume() {
            return Err(PyValueError::new_err(format!("site {site} outside the box")));
        }
        Ok(self.inner.index.coords(site))
    }

    fn __repr__(&self) -> String {
        format!("Lattice(dim={}, side={})", self.inner.dim(), self.inner.side())
    }
}

/// Single-site density, e.g. `Distribution("uniform:0,1")`.
#[pyclass(name = "Distribution", frozen)]
struct PyDistribution {
    inner: DistributionSpec,
}

#[pymethods]
impl PyDistribution {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(Self { inner: spec.parse().map_err(lab_err)? })
    }

    #[getter]
    fn density_sup(&self) -> f64 {
        self.inner.density_sup()
    }

    #[getter]
    fn support(&self) -> (f64, f64) {
        (self.inner.support_inf(), self.inner.support_sup())
    }

    fn density(&self, x: f64) -> f64 {
        self.inner.density(x)
    }

    fn quantile(&self, u: f64) -> PyResult<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(PyValueError::new_err("u must lie in [0, 1]"));
        }
        Ok(self.inner.quantile(u))
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Distribution('{}')", self.inner)
    }
}

/// Smooth cutoff equal to 1 on `[0, E]` and 0 from `2E` on.
#[pyclass(name = "Cutoff", frozen)]
struct PyCutoff {
    inner: SmoothCutoff,
}

#[pymethods]
impl PyCutoff {
    #[new]
    fn new(scale: f64) -> PyResult<Self> {
        Ok(Self { inner: probes::make_cutoff(scale).map_err(lab_err)? })
    }

    fn __call__(&self, t: f64) -> f64 {
        self.inner.value(t)
    }

    fn value(&self, t: f64) -> f64 {
        self.inner.value(t)
    }

    fn derivative(&self, t: f64, order: usize) -> PyResult<f64> {
        if order > probes::MAX_DERIVATIVE {
            return Err(PyValueError::new_err(format!("order must be at most {}", probes::MAX_DERIVATIVE)));
        }
        Ok(self.inner.derivative(t, order))
    }

    #[pyo3(signature = (dim = 1, grid_points = 2001))]
    fn audit<'py>(&self, py: Python<'py>, dim: usize, grid_points: usize) -> PyResult<Bound<'py, PyAny>> {
        let a = probes::audit_cutoff(&self.inner, dim, grid_points).map_err(lab_err)?;
        to_py(py, &a)
    }
}

#[pyfunction]
fn sample_disorder(lattice: &PyLattice, dist: &PyDistribution, seed: u64, realization: u64) -> Vec<f64> {
    lattice::sample_disorder(&dist.inner, &lattice.inner, seed, realization).values
}

/// Ascending eigenvalues of `−Δ + V` for the given potential.
#[pyfunction]
fn eigenvalues(py: Python<'_>, lattice: &PyLattice, potential: Vec<f64>) -> PyResult<Vec<f64>> {
    if potential.len() != lattice.inner.volume() {
        return Err(PyValueError::new_err(format!(
            "potential has {} entries, box has {} sites",
            potential.len(),
            lattice.inner.volume()
        )));
    }
    let lat = lattice.inner.clone();
    py.detach(move || {
        let h = lattice::assemble_hamiltonian(&lat, &DisorderField::from_values(potential))?;
        Ok::<_, LabError>(eigensolve(&h, false, lat.volume_cap)?.values)
    })
    .map_err(lab_err)
}

#[pyfunction]
#[pyo3(signature = (lattice, dist, grid, samples, seed = 0, workers = 1))]
fn estimate_ids<'py>(
    py: Python<'py>,
    lattice: &PyLattice,
    dist: &PyDistribution,
    grid: Vec<f64>,
    samples: u64,
    seed: u64,
    workers: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let (lat, d) = (lattice.inner.clone(), dist.inner.clone());
    let curve = py
        .detach(move || est::estimate_ids(&lat, &d, &grid, &sampling(samples, seed, workers)))
        .map_err(lab_err)?;
    to_py(py, &curve)
}

/// Histogram DOS. Without `edges`, `bins` equal bins cover the whole spectrum.
#[pyfunction]
#[pyo3(signature = (lattice, dist, samples, seed = 0, workers = 1, edges = None, bins = 100, bandwidth = None))]
#[allow(clippy::too_many_arguments)]
fn estimate_dos<'py>(
    py: Python<'py>,
    lattice: &PyLattice,
    dist: &PyDistribution,
    samples: u64,
    seed: u64,
    workers: usize,
    edges: Option<Vec<f64>>,
    bins: usize,
    bandwidth: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let (lat, d) = (lattice.inner.clone(), dist.inner.clone());
    let edges = edges.unwrap_or_else(|| est::uniform_edges(0.0, est::spectral_top(&lat, &d), bins));
    let dos = py
        .detach(move || est::estimate_dos(&lat, &d, &edges, &sampling(samples, seed, workers), bandwidth))
        .map_err(lab_err)?;
    to_py(py, &dos)
}

#[pyfunction]
#[pyo3(signature = (lattice, dist, intervals, samples, seed = 0, workers = 1))]
fn wegner_ratios<'py>(
    py: Python<'py>,
    lattice: &PyLattice,
    dist: &PyDistribution,
    intervals: Vec<(f64, f64)>,
    samples: u64,
    seed: u64,
    workers: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let ivs = self::intervals(&intervals)?;
    let (lat, d) = (lattice.inner.clone(), dist.inner.clone());
    let reps = py
        .detach(move || est::wegner_ratios(&lat, &d, &ivs, &sampling(samples, seed, workers)))
        .map_err(lab_err)?;
    to_py(py, &reps)
}

#[pyfunction]
#[pyo3(signature = (lattice, dist, intervals, samples, seed = 0, workers = 1, site = None))]
#[allow(clippy::too_many_arguments)]
fn spectral_averaging<'py>(
    py: Python<'py>,
    lattice: &PyLattice,
    dist: &PyDistribution,
    intervals: Vec<(f64, f64)>,
    samples: u64,
    seed: u64,
    workers: usize,
    site: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let ivs = self::intervals(&intervals)?;
    let (lat, d) = (lattice.inner.clone(), dist.inner.clone());
    let site = site.unwrap_or_else(|| lat.zero_site());
    let reps = py
        .detach(move || est::spectral_averaging_audit(&lat, &d, site, &ivs, &sampling(samples, seed, workers)))
        .map_err(lab_err)?;
    to_py(py, &reps)
}

/// `ℓ̂(E) = log(−log N(E)) / log E` on the points inside `window`.
#[pyfunction]
#[pyo3(signature = (energies, values, window = (0.05, 0.3)))]
fn lifshitz_fit<'py>(
    py: Python<'py>,
    energies: Vec<f64>,
    values: Vec<f64>,
    window: (f64, f64),
) -> PyResult<Bound<'py, PyAny>> {
    let fit = est::lifshitz_fit_points(&energies, &values, None, None, window).map_err(lab_err)?;
    to_py(py, &fit)
}

/// Poisson diagnostics of rescaled eigenvalues near `energy` (default: the
/// DOS peak of the lower band). The raw points are left out of the result.
#[pyfunction]
#[pyo3(signature = (lattice, dist, samples, seed = 0, workers = 1, energy = None, window_spacings = 5.0, bins = 100))]
#[allow(clippy::too_many_arguments)]
fn minami<'py>(
    py: Python<'py>,
    lattice: &PyLattice,
    dist: &PyDistribution,
    samples: u64,
    seed: u64,
    workers: usize,
    energy: Option<f64>,
    window_spacings: f64,
    bins: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let (lat, d) = (lattice.inner.clone(), dist.inner.clone());
    let params = MinamiParams { energy, window_spacings, bins };
    let rep = py
        .detach(move || est::minami_statistics(&lat, &d, &params, &sampling(samples, seed, workers)))
        .map_err(lab_err)?;
    let mut v = serde_json::to_value(&rep).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    if let Some(m) = v.as_object_mut() {
        m.remove("points");
    }
    json_to_py(py, &v)
}

#[pyfunction]
#[pyo3(signature = (cases, seed = 0, workers = 1))]
fn trace_lemma_corpus<'py>(py: Python<'py>, cases: u64, seed: u64, workers: usize) -> PyResult<Bound<'py, PyAny>> {
    let rep = py.detach(move || probes::run_lemma_corpus(&sampling(cases, seed, workers))).map_err(lab_err)?;
    to_py(py, &rep)
}

#[pyfunction]
#[pyo3(signature = (lattice, dist, energy, samples, seed = 0, workers = 1))]
fn kernel_decay<'py>(
    py: Python<'py>,
    lattice: &PyLattice,
    dist: &PyDistribution,
    energy: f64,
    samples: u64,
    seed: u64,
    workers: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let (lat, d) = (lattice.inner.clone(), dist.inner.clone());
    let prof = py
        .detach(move || probes::kernel_decay_profile(&lat, &d, energy, &sampling(samples, seed, workers)))
        .map_err(lab_err)?;
    to_py(py, &prof)
}

#[pyfunction]
#[pyo3(signature = (lattice, dist, times, energy, samples, seed = 0, workers = 1))]
#[allow(clippy::too_many_arguments)]
fn heat_cases<'py>(
    py: Python<'py>,
    lattice: &PyLattice,
    dist: &PyDistribution,
    times: Vec<f64>,
    energy: f64,
    samples: u64,
    seed: u64,
    workers: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let (lat, d) = (lattice.inner.clone(), dist.inner.clone());
    let rep = py
        .detach(move || probes::heat_cases(&lat, &d, &times, energy, &sampling(samples, seed, workers)))
        .map_err(lab_err)?;
    to_py(py, &rep)
}

/// Sublattice decoupling chain at energy `E`, interval `[0, E]`.
#[pyfunction]
#[pyo3(signature = (lattice, dist, energy, samples, seed = 0, workers = 1, epsilon = 0.1))]
#[allow(clippy::too_many_arguments)]
fn decoupling<'py>(
    py: Python<'py>,
    lattice: &PyLattice,
    dist: &PyDistribution,
    energy: f64,
    samples: u64,
    seed: u64,
    workers: usize,
    epsilon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let params = DecouplingParams::new(lattice.inner.dim(), epsilon, energy).map_err(lab_err)?;
    let (lat, d) = (lattice.inner.clone(), dist.inner.clone());
    let rep = py
        .detach(move || probes::evaluate_decoupling_bound(&lat, &d, &params, None, &sampling(samples, seed, workers)))
        .map_err(lab_err)?;
    let out = PyDict::new(py);
    out.set_item("t_E", rep.params.t_e)?;
    out.set_item("valid", rep.params.valid)?;
    out.set_item("chains", rep.chains.iter().map(|c| c.levels.to_vec()).collect::<Vec<_>>())?;
    out.set_item("chain_violations", rep.chain_violations)?;
    out.set_item("min_chain_gap", rep.min_chain_gap)?;
    out.set_item("sublattice_offset", rep.sublattice_offset.clone())?;
    out.set_item("sublattice_ids", rep.sublattice_ids.mean())?;
    out.set_item("ergodic_bound", rep.ergodic_bound())?;
    out.set_item("ergodic_violations", rep.ergodic_violations)?;
    Ok(out)
}

/// Run a named experiment as the command line would and return the paths
/// written, whether a check tripped and the run summary.
#[pyfunction]
#[pyo3(signature = (
    experiment, *, out = None, dim = None, side = None, dist = None, samples = None, seed = None,
    workers = None, max_volume = None, emin = None, emax = None, npoints = None, energy = None,
    intervals = None, bins = None, bandwidth = None, window_spacings = None, epsilon = None, times = None,
))]
#[allow(clippy::too_many_arguments)]
fn run_experiment<'py>(
    py: Python<'py>,
    experiment: String,
    out: Option<PathBuf>,
    dim: Option<usize>,
    side: Option<usize>,
    dist: Option<String>,
    samples: Option<u64>,
    seed: Option<u64>,
    workers: Option<usize>,
    max_volume: Option<usize>,
    emin: Option<f64>,
    emax: Option<f64>,
    npoints: Option<usize>,
    energy: Option<f64>,
    intervals: Option<Vec<(f64, f64)>>,
    bins: Option<usize>,
    bandwidth: Option<f64>,
    window_spacings: Option<f64>,
    epsilon: Option<f64>,
    times: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let o = Overrides {
        experiment: Some(experiment),
        dim,
        side,
        dist,
        samples,
        seed,
        workers,
        out,
        max_volume,
        emin,
        emax,
        npoints,
        energy,
        intervals,
        bins,
        bandwidth,
        window_spacings,
        epsilon,
        times,
    };
    let cfg = ExperimentConfig::resolve(o).map_err(harness_err)?;
    let outcome = py.detach(move || harness::run_experiment(&cfg)).map_err(harness_err)?;
    let d = PyDict::new(py);
    d.set_item("exit_code", outcome.exit_code())?;
    d.set_item("csv", outcome.csv_path)?;
    d.set_item("manifest", outcome.manifest_path)?;
    d.set_item("tripped", outcome.tripped)?;
    d.set_item("summary", json_to_py(py, &outcome.summary)?)?;
    Ok(d)
}

#[pymodule]
fn anderson_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyLattice>()?;
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyCutoff>()?;
    m.add_function(wrap_pyfunction!(sample_disorder, m)?)?;
    m.add_function(wrap_pyfunction!(eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_ids, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_dos, m)?)?;
    m.add_function(wrap_pyfunction!(wegner_ratios, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_averaging, m)?)?;
    m.add_function(wrap_pyfunction!(lifshitz_fit, m)?)?;
    m.add_function(wrap_pyfunction!(minami, m)?)?;
    m.add_function(wrap_pyfunction!(trace_lemma_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_decay, m)?)?;
    m.add_function(wrap_pyfunction!(heat_cases, m)?)?;
    m.add_function(wrap_pyfunction!(decoupling, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
