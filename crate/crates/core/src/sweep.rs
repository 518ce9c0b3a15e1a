//! GDD and pump-power sweeps, the single-parameter entropy-offset fit, and
//! CSV output with a `# key: value` provenance block.
//!
//! Sweep points are independent and run on a dedicated thread pool; rows come
//! back in input order and every number is formatted with Rust's shortest
//! round-trip representation, so output bytes do not depend on the worker
//! count.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, SweepVariable};
use crate::entropy;
use crate::error::{Error, Result};
use crate::jsa::{build_jsa, default_grid};
use crate::numeric::golden_section;
use crate::photonstats::brightness;
use crate::schmidt::{high_gain_populations, k_high_gain, schmidt_eigenvalues, schmidt_number, truncate};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GddRow {
    pub gdd_fs2: f64,
    pub tau_fs: f64,
    pub gain: f64,
    #[serde(rename = "K_LG")]
    pub k_lg: f64,
    #[serde(rename = "K_HG")]
    pub k_hg: f64,
    pub s_mod: f64,
    pub s_occ: f64,
    pub s_total: f64,
    pub error: Option<String>,
}

impl GddRow {
    fn failed(gdd_fs2: f64, tau_fs: f64, gain: f64, err: &Error) -> Self {
        Self {
            gdd_fs2,
            tau_fs,
            gain,
            k_lg: f64::NAN,
            k_hg: f64::NAN,
            s_mod: f64::NAN,
            s_occ: f64::NAN,
            s_total: f64::NAN,
            error: Some(err.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerRow {
    pub pump_photons: f64,
    pub gain: f64,
    pub signal_photons: f64,
}

/// Runs `job` on a pool of `workers` threads (0 means rayon's default).
pub fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} worker threads: {e}")))?;
    Ok(pool.install(job))
}

/// One GDD point: JSA, Schmidt spectrum, populations at the policy gain and
/// the entropy partition.
pub fn gdd_point(cfg: &RunConfig, gdd_fs2: f64) -> GddRow {
    let pump = cfg.pump.with_gdd(gdd_fs2);
    let tau = pump.duration();
    let gain = cfg.sweep.gain_policy.gain(cfg.gain, cfg.pump.tau_fwhm_fs, tau);
    let run = || -> Result<GddRow> {
        let grid = default_grid(&cfg.crystal, &pump, cfg.grid.points, cfg.grid.span_lobes)?;
        let jsa = build_jsa(&cfg.crystal, &pump, &grid)?;
        let lambda = truncate(&schmidt_eigenvalues(&jsa)?);
        let pop = high_gain_populations(&lambda, gain)?;
        let report = entropy::report(&pop)?;
        Ok(GddRow {
            gdd_fs2,
            tau_fs: tau,
            gain,
            k_lg: schmidt_number(&lambda)?,
            k_hg: k_high_gain(&pop),
            s_mod: report.s_mod,
            s_occ: report.s_occ,
            s_total: report.s_total,
            error: None,
        })
    };
    run().unwrap_or_else(|e| GddRow::failed(gdd_fs2, tau, gain, &e))
}

/// The GDD sweep of `cfg.sweep`. Per-point failures are recorded in the row.
pub fn run_gdd_sweep(cfg: &RunConfig, workers: usize) -> Result<Vec<GddRow>> {
    cfg.validate()?;
    if cfg.sweep.variable != SweepVariable::Gdd {
        return Err(Error::Config("[sweep] variable is pump_power; a GDD sweep needs variable = gdd".into()));
    }
    let values = cfg.sweep.values();
    with_workers(workers, || values.par_iter().map(|&g| gdd_point(cfg, g)).collect())
}

/// `N_S = sinh²(a√N_P)` over the pump-photon range of `cfg.sweep`.
pub fn run_power_sweep(cfg: &RunConfig) -> Result<Vec<PowerRow>> {
    cfg.validate()?;
    if cfg.sweep.variable != SweepVariable::PumpPower {
        return Err(Error::Config("[sweep] variable is gdd; a power sweep needs variable = pump_power".into()));
    }
    let a = cfg.sweep.brightness_coefficient;
    Ok(cfg
        .sweep
        .values()
        .into_iter()
        .map(|np| PowerRow { pump_photons: np, gain: a * np.sqrt(), signal_photons: brightness(a, np) })
        .collect())
}

fn interpolate(curve: &[(f64, f64)], x: f64) -> Option<f64> {
    let i = curve.partition_point(|&(cx, _)| cx < x);
    if i < curve.len() && curve[i].0 == x {
        return Some(curve[i].1);
    }
    if i == 0 || i == curve.len() {
        return None;
    }
    let (x0, y0) = curve[i - 1];
    let (x1, y1) = curve[i];
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

/// Least-squares constant `c` such that `model + c` fits `data`, with the
/// model linearly interpolated at the data abscissae inside its range. `c` is
/// restricted so that the shifted model stays within `[0, 1]`.
pub fn fit_min_entropy_offset(model: &[(f64, f64)], data: &[(f64, f64)]) -> Result<f64> {
    let mut curve: Vec<(f64, f64)> = model.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    let pairs: Vec<(f64, f64)> =
        data.iter().filter_map(|&(x, y)| interpolate(&curve, x).filter(|_| y.is_finite()).map(|m| (m, y))).collect();
    if pairs.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let lo = -curve.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = 1.0 - curve.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if lo > hi {
        return Err(Error::DegenerateFit("model spans more than [0, 1]; no admissible offset".into()));
    }
    let cost = |c: f64| pairs.iter().map(|(m, y)| (m + c - y).powi(2)).sum::<f64>();
    if hi - lo < 1e-15 {
        return Ok(lo);
    }
    Ok(golden_section(cost, lo, hi, 1e-10))
}

/// Ordered `# key: value` lines written ahead of every CSV body.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Provenance {
    entries: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(command: &str, cfg: &RunConfig, seed: u64) -> Self {
        Self::default()
            .with("twinbeam_version", VERSION)
            .with("command", command)
            .with("config_hash", cfg.hash())
            .with("seed", seed)
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        for (k, v) in &self.entries {
            writeln!(out, "# {k}: {v}")?;
        }
        Ok(())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        x.to_string()
    }
}

pub fn write_gdd_csv<W: Write>(rows: &[GddRow], provenance: &Provenance, mut out: W) -> Result<()> {
    provenance.write(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["gdd_fs2", "tau_fs", "gain", "K_LG", "K_HG", "S_mod", "S_occ", "S_total", "error"])?;
    for r in rows {
        w.write_record([
            fmt(r.gdd_fs2),
            fmt(r.tau_fs),
            fmt(r.gain),
            fmt(r.k_lg),
            fmt(r.k_hg),
            fmt(r.s_mod),
            fmt(r.s_occ),
            fmt(r.s_total),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_power_csv<W: Write>(rows: &[PowerRow], provenance: &Provenance, mut out: W) -> Result<()> {
    provenance.write(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["N_P", "G", "N_S"])?;
    for r in rows {
        w.write_record([fmt(r.pump_photons), fmt(r.gain), fmt(r.signal_photons)])?;
    }
    w.flush()?;
    Ok(())
}
