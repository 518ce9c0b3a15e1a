//! Chirped Gaussian pump: spectral envelope and duration bookkeeping.
//!
//! The spectral width `σ_p` is the standard deviation of the field amplitude
//! `exp(−Ω²/2σ_p²)`, tied to the transform-limited intensity FWHM by
//! `σ_p = 2√(ln 2)/τ_fwhm`.

use num_complex::Complex64;
use serde::Serialize;

use crate::dispersion::wavelength_to_omega;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PumpConfig {
    pub center_wavelength_um: f64,
    /// Transform-limited intensity FWHM (fs).
    pub tau_fwhm_fs: f64,
    /// Group-delay dispersion (fs²).
    pub gdd_fs2: f64,
    /// Pulse energy (J). Only used for brightness bookkeeping.
    pub pulse_energy_j: Option<f64>,
}

impl Default for PumpConfig {
    fn default() -> Self {
        Self { center_wavelength_um: 1.026, tau_fwhm_fs: 260.0, gdd_fs2: 0.0, pulse_energy_j: Some(5e-6) }
    }
}

impl PumpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.center_wavelength_um > 0.0) {
            return Err(Error::invalid("pump wavelength", format!("must be > 0, got {}", self.center_wavelength_um)));
        }
        if !(self.tau_fwhm_fs > 0.0 && self.tau_fwhm_fs.is_finite()) {
            return Err(Error::invalid("tau_fwhm", format!("must be > 0, got {}", self.tau_fwhm_fs)));
        }
        if !self.gdd_fs2.is_finite() {
            return Err(Error::invalid("gdd", "must be finite"));
        }
        Ok(())
    }

    pub fn center_omega(&self) -> f64 {
        wavelength_to_omega(self.center_wavelength_um)
    }

    pub fn sigma(&self) -> f64 {
        spectral_sigma(self.tau_fwhm_fs)
    }

    pub fn duration(&self) -> f64 {
        stretched_duration(self.tau_fwhm_fs, self.gdd_fs2)
    }

    pub fn with_gdd(mut self, gdd_fs2: f64) -> Self {
        self.gdd_fs2 = gdd_fs2;
        self
    }
}

fn two_sqrt_ln2() -> f64 {
    2.0 * std::f64::consts::LN_2.sqrt()
}

/// Amplitude spectral standard deviation (rad/fs) for a transform-limited
/// intensity FWHM `tau_fwhm` (fs).
pub fn spectral_sigma(tau_fwhm: f64) -> f64 {
    two_sqrt_ln2() / tau_fwhm
}

/// Inverse of [`spectral_sigma`].
pub fn transform_limited_duration(sigma: f64) -> f64 {
    two_sqrt_ln2() / sigma
}

/// Unnormalized envelope `α(Ω) = exp(−Ω²/2σ²)·exp(i·GDD·Ω²/2)` at pump
/// detuning `detuning` (rad/fs).
pub fn envelope(detuning: f64, pump: &PumpConfig) -> Complex64 {
    envelope_with(detuning, pump.sigma(), pump.gdd_fs2)
}

pub fn envelope_with(detuning: f64, sigma: f64, gdd: f64) -> Complex64 {
    let d2 = detuning * detuning;
    Complex64::from_polar((-d2 / (2.0 * sigma * sigma)).exp(), 0.5 * gdd * d2)
}

/// Intensity FWHM (fs) of a Gaussian pulse of transform-limited duration
/// `tau0` after acquiring `gdd` (fs²) of quadratic spectral phase.
pub fn stretched_duration(tau0: f64, gdd: f64) -> f64 {
    let chirp = 4.0 * std::f64::consts::LN_2 * gdd / (tau0 * tau0);
    tau0 * (1.0 + chirp * chirp).sqrt()
}
