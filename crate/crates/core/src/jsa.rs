//! Joint spectral amplitude `J(ω_s, ω_i) = α(ω_s + ω_i − ω_p0)·Φ(ω_s, ω_i)` on a
//! rectangular frequency grid.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::dispersion::{self, inverse_group_velocity, solve_qpm, wavenumber, CrystalConfig, GROUP_DELAY_STEP};
use crate::error::{Error, Result};
use crate::numeric::fwhm;
use crate::pump::{self, PumpConfig};

pub const MIN_GRID_POINTS: usize = 64;
pub const DEFAULT_GRID_POINTS: usize = 512;
pub const DEFAULT_SPAN_LOBES: f64 = 4.0;

/// Uniform signal and idler angular-frequency axes (rad/fs).
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyGrid {
    signal: Vec<f64>,
    idler: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(signal: Vec<f64>, idler: Vec<f64>) -> Result<Self> {
        for (name, axis) in [("signal axis", &signal), ("idler axis", &idler)] {
            if axis.len() < MIN_GRID_POINTS {
                return Err(Error::invalid(name, format!("needs ≥ {MIN_GRID_POINTS} points, got {}", axis.len())));
            }
            if !axis.windows(2).all(|w| w[1] > w[0]) {
                return Err(Error::invalid(name, "must be strictly increasing"));
            }
        }
        Ok(Self { signal, idler })
    }

    /// Axes of `n` points spanning `center ± half_width` each.
    pub fn centered(center_s: f64, half_s: f64, center_i: f64, half_i: f64, n: usize) -> Result<Self> {
        let axis = |c: f64, h: f64| -> Vec<f64> {
            (0..n).map(|k| c - h + 2.0 * h * k as f64 / (n.max(2) - 1) as f64).collect()
        };
        Self::new(axis(center_s, half_s), axis(center_i, half_i))
    }

    pub fn signal(&self) -> &[f64] {
        &self.signal
    }

    pub fn idler(&self) -> &[f64] {
        &self.idler
    }

    pub fn axis(&self, which: Axis) -> &[f64] {
        match which {
            Axis::Signal => &self.signal,
            Axis::Idler => &self.idler,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Signal,
    Idler,
}

/// Complex JSA samples, rows indexed by signal frequency and columns by idler
/// frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct JsaMatrix {
    pub values: DMatrix<Complex64>,
    pub grid: FrequencyGrid,
}

impl JsaMatrix {
    /// Wraps `values` and rescales to unit Frobenius norm.
    pub fn normalized(mut values: DMatrix<Complex64>, grid: FrequencyGrid) -> Result<Self> {
        if values.nrows() != grid.signal.len() || values.ncols() != grid.idler.len() {
            return Err(Error::AxisMismatch(format!(
                "matrix is {}x{}, grid is {}x{}",
                values.nrows(),
                values.ncols(),
                grid.signal.len(),
                grid.idler.len()
            )));
        }
        let norm = values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        values.unscale_mut(norm);
        Ok(Self { values, grid })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn intensity(&self) -> DMatrix<f64> {
        self.values.map(|z| z.norm_sqr())
    }

    /// Index of the global maximum of `|J|²`; ties go to the cell closest to
    /// the grid center.
    pub fn peak(&self) -> (usize, usize) {
        let (nr, nc) = self.values.shape();
        let (cr, cc) = ((nr as f64 - 1.0) / 2.0, (nc as f64 - 1.0) / 2.0);
        let mut best = (0, 0);
        let mut best_val = f64::NEG_INFINITY;
        let mut best_dist = f64::INFINITY;
        for j in 0..nc {
            for i in 0..nr {
                let v = self.values[(i, j)].norm_sqr();
                let dist = (i as f64 - cr).powi(2) + (j as f64 - cc).powi(2);
                if v > best_val || (v == best_val && dist < best_dist) {
                    best = (i, j);
                    best_val = v;
                    best_dist = dist;
                }
            }
        }
        best
    }

    /// Writes a chosen real component as CSV: the first row holds the idler
    /// axis, each following row starts with its signal frequency.
    pub fn write_csv<W: Write>(&self, out: W, component: Component) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["omega_s\\omega_i".to_string()];
        header.extend(self.grid.idler.iter().map(|x| x.to_string()));
        w.write_record(&header)?;
        for (i, ws) in self.grid.signal.iter().enumerate() {
            let mut row = vec![ws.to_string()];
            row.extend(self.values.row(i).iter().map(|z| component.of(*z).to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Abs,
    AbsSquared,
    Real,
    Imag,
    Phase,
}

impl Component {
    pub fn of(self, z: Complex64) -> f64 {
        match self {
            Component::Abs => z.norm(),
            Component::AbsSquared => z.norm_sqr(),
            Component::Real => z.re,
            Component::Imag => z.im,
            Component::Phase => z.arg(),
        }
    }
}

impl std::str::FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "abs" => Component::Abs,
            "abs2" => Component::AbsSquared,
            "real" => Component::Real,
            "imag" => Component::Imag,
            "phase" => Component::Phase,
            other => return Err(Error::invalid("component", format!("unknown component `{other}`"))),
        })
    }
}

/// Samples `α·Φ` on `grid` and normalizes.
///
/// Columns are filled in parallel; each element is computed independently, so
/// the result does not depend on the thread schedule.
pub fn build_jsa(crystal: &CrystalConfig, pump: &PumpConfig, grid: &FrequencyGrid) -> Result<JsaMatrix> {
    crystal.validate()?;
    pump.validate()?;
    let t = crystal.temperature_k;
    let s = &crystal.sellmeier;
    let length = crystal.length_um();
    let grating = crystal.grating_wavenumber();
    let omega_p0 = pump.center_omega();
    let sigma = pump.sigma();
    let gdd = pump.gdd_fs2;

    let k_signal = grid.signal.iter().map(|&w| wavenumber(w, t, s)).collect::<Result<Vec<_>>>()?;
    let k_idler = grid.idler.iter().map(|&w| wavenumber(w, t, s)).collect::<Result<Vec<_>>>()?;

    let columns: Vec<Vec<Complex64>> = grid
        .idler
        .par_iter()
        .zip(k_idler.par_iter())
        .map(|(&wi, &ki)| {
            grid.signal
                .iter()
                .zip(&k_signal)
                .map(|(&ws, &ks)| {
                    let kp = wavenumber(ws + wi, t, s)?;
                    let phi = dispersion::phase_matching_from_mismatch(kp - ks - ki - grating, length);
                    Ok(pump::envelope_with(ws + wi - omega_p0, sigma, gdd) * phi)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let values = DMatrix::from_iterator(grid.signal.len(), grid.idler.len(), columns.into_iter().flatten());
    JsaMatrix::normalized(values, grid.clone())
}

/// Grid centered on the phase-matched pair, with both axes spanning
/// `±max(span_lobes` sinc lobes along the anti-diagonal`, 4σ_p)`.
pub fn default_grid(
    crystal: &CrystalConfig,
    pump: &PumpConfig,
    n_points: usize,
    span_lobes: f64,
) -> Result<FrequencyGrid> {
    if n_points < MIN_GRID_POINTS {
        return Err(Error::invalid("n_points", format!("needs ≥ {MIN_GRID_POINTS}, got {n_points}")));
    }
    if !(span_lobes >= 2.0) {
        return Err(Error::invalid("span_lobes", format!("needs ≥ 2, got {span_lobes}")));
    }
    pump.validate()?;
    let sol = solve_qpm(pump.center_wavelength_um, crystal)?;
    let (ws, wi) = (sol.signal_omega(), sol.idler_omega());
    let t = crystal.temperature_k;
    let s = &crystal.sellmeier;
    // Along ω_s + ω_i = const, dΔk/dΩ_s = k_i' − k_s'.
    let slope = (inverse_group_velocity(wi, t, s, GROUP_DELAY_STEP)?
        - inverse_group_velocity(ws, t, s, GROUP_DELAY_STEP)?)
    .abs();
    let lobe = std::f64::consts::TAU / (crystal.length_um() * slope);
    let half = (span_lobes * lobe).max(4.0 * pump.sigma());
    FrequencyGrid::centered(ws, half, wi, half, n_points)
}

fn width_error(kind: &str, which: Axis) -> Error {
    Error::Resolution(format!("{kind} {which:?} profile is narrower than 3 cells or not contained in the grid"))
}

/// FWHM of the marginal `Σ_other |J|²` along `which`.
pub fn marginal_width(jsa: &JsaMatrix, which: Axis) -> Result<f64> {
    let inten = jsa.intensity();
    let profile: Vec<f64> = match which {
        Axis::Signal => inten.row_iter().map(|r| r.sum()).collect(),
        Axis::Idler => inten.column_iter().map(|c| c.sum()).collect(),
    };
    let peak = argmax_centered(&profile);
    fwhm(jsa.grid.axis(which), &profile, peak).ok_or_else(|| width_error("marginal", which))
}

/// FWHM of the `|J|²` slice along `which` through the global maximum.
pub fn conditional_width(jsa: &JsaMatrix, which: Axis) -> Result<f64> {
    let (pi, pj) = jsa.peak();
    let inten = jsa.intensity();
    let (profile, peak): (Vec<f64>, usize) = match which {
        Axis::Signal => (inten.column(pj).iter().copied().collect(), pi),
        Axis::Idler => (inten.row(pi).iter().copied().collect(), pj),
    };
    fwhm(jsa.grid.axis(which), &profile, peak).ok_or_else(|| width_error("conditional", which))
}

/// Marginal-to-conditional width ratio on the signal axis.
pub fn fedorov_ratio(jsa: &JsaMatrix) -> Result<f64> {
    Ok(marginal_width(jsa, Axis::Signal)? / conditional_width(jsa, Axis::Signal)?)
}

fn argmax_centered(v: &[f64]) -> usize {
    let c = (v.len() as f64 - 1.0) / 2.0;
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        let better = x > v[best] || (x == v[best] && (i as f64 - c).abs() < (best as f64 - c).abs());
        if better {
            best = i;
        }
    }
    best
}
