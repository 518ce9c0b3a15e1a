//! Python bindings. Heavy computations release the interpreter lock.

use nalgebra::DMatrix;
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use twinbeam::analysis::{bootstrap_k, g1_from_covariance, SpectraEnsemble};
use twinbeam::config::RunConfig;
use twinbeam::dispersion::{refractive_index as index_at, solve_qpm as solve, CrystalConfig};
use twinbeam::gaussian::{condition_idler as condition, difference_quadrature_variance, LoProjection, TmssState};
use twinbeam::jsa::{build_jsa, default_grid};
use twinbeam::photonstats::{self, sample_shots_with, summarize, ModeStatistics, DEFAULT_BATCHES};
use twinbeam::schmidt::{
    high_gain_populations, k_high_gain, schmidt_eigenvalues, schmidt_number, truncate, HighGainPopulation,
};
use twinbeam::{entropy, sweep, ErrorKind};

create_exception!(pytwinbeam, TwinbeamError, PyException);
create_exception!(pytwinbeam, ConfigError, TwinbeamError);
create_exception!(pytwinbeam, NumericalError, TwinbeamError);
create_exception!(pytwinbeam, ResourceError, TwinbeamError);

fn to_py(e: twinbeam::Error) -> PyErr {
    let msg = e.to_string();
    match e.kind() {
        ErrorKind::Config => ConfigError::new_err(msg),
        ErrorKind::Numerical => NumericalError::new_err(msg),
        ErrorKind::Resource => ResourceError::new_err(msg),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for twinbeam::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn config(ini: &str, overrides: Vec<String>) -> PyResult<RunConfig> {
    let mut cfg = RunConfig::from_ini_str(ini).py_err()?;
    for o in &overrides {
        cfg.apply_override(o).py_err()?;
    }
    cfg.validate().py_err()?;
    Ok(cfg)
}

#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct QpmSolution {
    pump_um: f64,
    signal_um: f64,
    idler_um: f64,
    delta_k: f64,
}

#[pymethods]
impl QpmSolution {
    fn __repr__(&self) -> String {
        format!("QpmSolution(pump_um={}, signal_um={}, idler_um={})", self.pump_um, self.signal_um, self.idler_um)
    }
}

/// Extraordinary index of the default crystal at `lambda_um`.
#[pyfunction]
#[pyo3(signature = (lambda_um, temperature_k = None))]
fn refractive_index(lambda_um: f64, temperature_k: Option<f64>) -> PyResult<f64> {
    let s = CrystalConfig::default().sellmeier;
    index_at(lambda_um, temperature_k.unwrap_or(s.t_room), &s).py_err()
}

#[pyfunction]
#[pyo3(signature = (pump_um = 1.026, temperature_k = None, poling_period_um = None, length_mm = None))]
fn solve_qpm(
    pump_um: f64,
    temperature_k: Option<f64>,
    poling_period_um: Option<f64>,
    length_mm: Option<f64>,
) -> PyResult<QpmSolution> {
    let mut crystal = CrystalConfig::default();
    if let Some(t) = temperature_k {
        crystal = crystal.with_temperature(t);
    }
    if let Some(p) = poling_period_um {
        crystal.poling_period_um = p;
    }
    if let Some(l) = length_mm {
        crystal.length_mm = l;
    }
    let s = solve(pump_um, &crystal).py_err()?;
    Ok(QpmSolution { pump_um: s.pump_um, signal_um: s.signal_um, idler_um: s.idler_um, delta_k: s.delta_k })
}

#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct SchmidtResult {
    eigenvalues: Vec<f64>,
    weights: Vec<f64>,
    photons: Vec<f64>,
    k_lg: f64,
    k_hg: f64,
}

/// Schmidt spectrum of the configured JSA and its populations at `gain`.
///
/// `ini` is configuration text; `overrides` are `section.key=value` strings.
#[pyfunction]
#[pyo3(signature = (ini = String::new(), overrides = Vec::new(), gain = None))]
fn schmidt(py: Python<'_>, ini: String, overrides: Vec<String>, gain: Option<f64>) -> PyResult<SchmidtResult> {
    let cfg = config(&ini, overrides)?;
    let gain = gain.unwrap_or(cfg.gain);
    py.detach(|| {
        let grid = default_grid(&cfg.crystal, &cfg.pump, cfg.grid.points, cfg.grid.span_lobes)?;
        let lambda = truncate(&schmidt_eigenvalues(&build_jsa(&cfg.crystal, &cfg.pump, &grid)?)?);
        let pop = high_gain_populations(&lambda, gain)?;
        Ok(SchmidtResult {
            k_lg: schmidt_number(&lambda)?,
            k_hg: k_high_gain(&pop),
            eigenvalues: lambda,
            weights: pop.weights,
            photons: pop.photons,
        })
    })
    .py_err()
}

/// `1/Σπ_n²` with `π_n ∝ sinh²(G√λ_n)`.
#[pyfunction]
fn high_gain_k(eigenvalues: Vec<f64>, gain: f64) -> PyResult<f64> {
    Ok(k_high_gain(&high_gain_populations(&eigenvalues, gain).py_err()?))
}

#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct EntropyReport {
    s_occ: f64,
    s_mod: f64,
    s_total: f64,
}

/// Entropy partition for per-mode mean photon numbers.
#[pyfunction]
fn entropy_report(photons: Vec<f64>) -> PyResult<EntropyReport> {
    let r = entropy::report(&HighGainPopulation::from_photons(photons).py_err()?).py_err()?;
    Ok(EntropyReport { s_occ: r.s_occ, s_mod: r.s_mod, s_total: r.s_total })
}

#[pyfunction]
fn mean_photons(gain: f64) -> PyResult<f64> {
    photonstats::mean_photons(gain).py_err()
}

#[pyfunction]
fn invert_gain(photons: f64) -> PyResult<f64> {
    photonstats::invert_gain(photons).py_err()
}

#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct G2Summary {
    mean: f64,
    std: f64,
    g2: f64,
    k_g2: f64,
    stderr: f64,
}

/// Monte-Carlo photon numbers and their g2 summary.
#[pyfunction]
#[pyo3(signature = (weights, total_mean, shots, seed, statistics = "continuous"))]
fn simulate_g2(
    py: Python<'_>,
    weights: Vec<f64>,
    total_mean: f64,
    shots: usize,
    seed: u64,
    statistics: &str,
) -> PyResult<G2Summary> {
    let statistics: ModeStatistics = statistics.parse().py_err()?;
    py.detach(|| {
        let ens = sample_shots_with(&weights, total_mean, shots, seed, statistics)?;
        summarize(&ens, DEFAULT_BATCHES)
    })
    .map(|s| G2Summary { mean: s.mean, std: s.std, g2: s.g2, k_g2: s.k_g2, stderr: s.stderr })
    .py_err()
}

#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct ConditionedIdler {
    photons: u32,
    patterns: Vec<Vec<u32>>,
    weights: Vec<f64>,
    purity: f64,
}

/// Idler state after detecting `photons` signal photons from modes with
/// squeezing `r` (phases `phi`, default zero).
#[pyfunction]
#[pyo3(signature = (r, photons, phi = None, cutoff = None))]
fn condition_idler(
    r: Vec<f64>,
    photons: u32,
    phi: Option<Vec<f64>>,
    cutoff: Option<u32>,
) -> PyResult<ConditionedIdler> {
    let phi = phi.unwrap_or_else(|| vec![0.0; r.len()]);
    let state = TmssState::new(r, phi).py_err()?;
    let c = condition(&state, photons, cutoff.unwrap_or(photons)).py_err()?;
    Ok(ConditionedIdler { photons: c.photons, patterns: c.patterns, weights: c.weights, purity: c.purity })
}

/// Variance of the normalized difference quadrature for local-oscillator
/// overlaps `c` (signal) and `d` (idler).
#[pyfunction]
#[pyo3(signature = (r, phi, c, d, theta_s = 0.0, theta_i = 0.0))]
fn quadrature_variance(
    r: Vec<f64>,
    phi: Vec<f64>,
    c: Vec<Complex64>,
    d: Vec<Complex64>,
    theta_s: f64,
    theta_i: f64,
) -> PyResult<f64> {
    let state = TmssState::new(r, phi).py_err()?;
    let proj = LoProjection::new(c, d, theta_s, theta_i).py_err()?;
    difference_quadrature_variance(&state, &proj).py_err()
}

#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct GddPoint {
    gdd_fs2: f64,
    tau_fs: f64,
    gain: f64,
    k_lg: f64,
    k_hg: f64,
    s_mod: f64,
    s_occ: f64,
    s_total: f64,
    error: Option<String>,
}

/// The configured GDD sweep.
#[pyfunction]
#[pyo3(signature = (ini = String::new(), overrides = Vec::new(), workers = 0))]
fn gdd_sweep(py: Python<'_>, ini: String, overrides: Vec<String>, workers: usize) -> PyResult<Vec<GddPoint>> {
    let mut cfg = config(&ini, Vec::new())?;
    cfg.set("sweep", "variable", "gdd").py_err()?;
    for o in &overrides {
        cfg.apply_override(o).py_err()?;
    }
    cfg.validate().py_err()?;
    let rows = py.detach(|| sweep::run_gdd_sweep(&cfg, workers)).py_err()?;
    Ok(rows
        .into_iter()
        .map(|r| GddPoint {
            gdd_fs2: r.gdd_fs2,
            tau_fs: r.tau_fs,
            gain: r.gain,
            k_lg: r.k_lg,
            k_hg: r.k_hg,
            s_mod: r.s_mod,
            s_occ: r.s_occ,
            s_total: r.s_total,
            error: r.error,
        })
        .collect())
}

#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct SpectraAnalysis {
    k: f64,
    raw_eigenvalues: Vec<f64>,
    weights: Vec<f64>,
    k_mean: Option<f64>,
    k_std: Option<f64>,
    warning: Option<String>,
}

/// Covariance-based Schmidt number of shot-resolved spectra, given as one
/// list per shot sampled on `axis`.
#[pyfunction]
#[pyo3(signature = (spectra, axis, subsets = 0))]
fn analyze_spectra(
    py: Python<'_>,
    spectra: Vec<Vec<f64>>,
    axis: Vec<f64>,
    subsets: usize,
) -> PyResult<SpectraAnalysis> {
    let bins = axis.len();
    if let Some(bad) = spectra.iter().position(|s| s.len() != bins) {
        return Err(ConfigError::new_err(format!("shot {bad} has {} bins, axis has {bins}", spectra[bad].len())));
    }
    let shots = spectra.len();
    let flat: Vec<f64> = spectra.into_iter().flatten().collect();
    py.detach(|| {
        let ens = SpectraEnsemble::new(DMatrix::from_row_slice(shots, bins, &flat), axis, None)?;
        let est = g1_from_covariance(&ens)?;
        let boot = if subsets > 0 { Some(bootstrap_k(&ens, subsets)?) } else { None };
        Ok(SpectraAnalysis {
            k: est.k,
            raw_eigenvalues: est.raw_eigenvalues,
            weights: est.weights,
            k_mean: boot.as_ref().map(|b| b.mean),
            k_std: boot.as_ref().map(|b| b.std),
            warning: est.warning,
        })
    })
    .py_err()
}

#[pymodule]
fn pytwinbeam(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("TwinbeamError", py.get_type::<TwinbeamError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    m.add("ResourceError", py.get_type::<ResourceError>())?;
    m.add_class::<QpmSolution>()?;
    m.add_class::<SchmidtResult>()?;
    m.add_class::<EntropyReport>()?;
    m.add_class::<G2Summary>()?;
    m.add_class::<ConditionedIdler>()?;
    m.add_class::<GddPoint>()?;
    m.add_class::<SpectraAnalysis>()?;
    m.add_function(wrap_pyfunction!(refractive_index, m)?)?;
    m.add_function(wrap_pyfunction!(solve_qpm, m)?)?;
    m.add_function(wrap_pyfunction!(schmidt, m)?)?;
    m.add_function(wrap_pyfunction!(high_gain_k, m)?)?;
    m.add_function(wrap_pyfunction!(entropy_report, m)?)?;
    m.add_function(wrap_pyfunction!(mean_photons, m)?)?;
    m.add_function(wrap_pyfunction!(invert_gain, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_g2, m)?)?;
    m.add_function(wrap_pyfunction!(condition_idler, m)?)?;
    m.add_function(wrap_pyfunction!(quadrature_variance, m)?)?;
    m.add_function(wrap_pyfunction!(gdd_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_spectra, m)?)?;
    Ok(())
}
