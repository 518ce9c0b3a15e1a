//! Extraordinary-index dispersion of congruent lithium niobate and first-order
//! quasi-phase-matching kinematics.
//!
//! Units throughout: wavelengths in µm, angular frequencies in rad/fs,
//! wavenumbers in rad/µm, temperatures in K. Pump, signal and idler all see the
//! same extraordinary branch (type-0 interaction).

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{bisect, sinc};

/// Speed of light in µm/fs.
pub const SPEED_OF_LIGHT: f64 = 0.299_792_458;

/// Lower edge of the wavelength window the Sellmeier fit is trusted on (µm).
pub const VALID_MIN_UM: f64 = 0.3;
/// Upper edge of the wavelength window the Sellmeier fit is trusted on (µm).
pub const VALID_MAX_UM: f64 = 5.5;

/// Temperature-dependent Sellmeier coefficients,
/// `n² = a1 + f·b1 + (a2 + f·b2)/(λ² − (a3 + f·b3)²) + (a4 + f·b4)/(λ² − a5²) − a6·λ²`
/// with `f = T² − T_room²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SellmeierCoefficients {
    pub a: [f64; 6],
    pub b: [f64; 4],
    /// Reference temperature at which the temperature correction vanishes (K).
    pub t_room: f64,
}

impl Default for SellmeierCoefficients {
    fn default() -> Self {
        Self {
            a: [5.756, 0.0983, 0.202, 189.32, 12.52, 0.0132],
            b: [2.86e-6, 4.7e-8, 6.113e-8, 1.516e-4],
            t_room: 293.15,
        }
    }
}

impl SellmeierCoefficients {
    /// Temperature factor `T² − T_room²`.
    pub fn temperature_factor(&self, temperature_k: f64) -> f64 {
        temperature_k * temperature_k - self.t_room * self.t_room
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrystalConfig {
    /// Poling period Λ (µm). `f64::INFINITY` describes an unpoled crystal.
    pub poling_period_um: f64,
    /// Crystal length L (mm).
    pub length_mm: f64,
    pub temperature_k: f64,
    pub sellmeier: SellmeierCoefficients,
}

impl Default for CrystalConfig {
    fn default() -> Self {
        Self {
            poling_period_um: 27.91,
            length_mm: 2.0,
            temperature_k: SellmeierCoefficients::default().t_room,
            sellmeier: SellmeierCoefficients::default(),
        }
    }
}

impl CrystalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.poling_period_um > 0.0) {
            return Err(Error::invalid("poling_period", format!("must be > 0, got {}", self.poling_period_um)));
        }
        if !(self.length_mm > 0.0 && self.length_mm.is_finite()) {
            return Err(Error::invalid("length", format!("must be > 0, got {}", self.length_mm)));
        }
        if !(self.temperature_k > 0.0 && self.temperature_k.is_finite()) {
            return Err(Error::invalid("temperature", format!("must be > 0 K, got {}", self.temperature_k)));
        }
        Ok(())
    }

    /// Crystal length in µm.
    pub fn length_um(&self) -> f64 {
        self.length_mm * 1e3
    }

    /// Grating wavevector `2π/Λ` (rad/µm).
    pub fn grating_wavenumber(&self) -> f64 {
        TAU / self.poling_period_um
    }

    pub fn with_temperature(mut self, temperature_k: f64) -> Self {
        self.temperature_k = temperature_k;
        self
    }
}

pub fn wavelength_to_omega(lambda_um: f64) -> f64 {
    TAU * SPEED_OF_LIGHT / lambda_um
}

pub fn omega_to_wavelength(omega: f64) -> f64 {
    TAU * SPEED_OF_LIGHT / omega
}

/// Extraordinary refractive index at `lambda_um` and `temperature_k`.
pub fn refractive_index(lambda_um: f64, temperature_k: f64, s: &SellmeierCoefficients) -> Result<f64> {
    if !(VALID_MIN_UM..=VALID_MAX_UM).contains(&lambda_um) {
        return Err(Error::OutOfWindow { lambda_um, min_um: VALID_MIN_UM, max_um: VALID_MAX_UM });
    }
    let f = s.temperature_factor(temperature_k);
    let l2 = lambda_um * lambda_um;

    let uv_pole = s.a[2] + f * s.b[2];
    let uv_den = l2 - uv_pole * uv_pole;
    if uv_den.abs() <= 1e-12 * l2 {
        return Err(Error::SellmeierPole { term: "ultraviolet", lambda_um });
    }
    let ir_den = l2 - s.a[4] * s.a[4];
    if ir_den.abs() <= 1e-12 * l2 {
        return Err(Error::SellmeierPole { term: "infrared", lambda_um });
    }

    let constant = s.a[0] + f * s.b[0];
    let uv = (s.a[1] + f * s.b[1]) / uv_den;
    let ir = (s.a[3] + f * s.b[3]) / ir_den;
    let lattice = -s.a[5] * l2;
    let n2 = constant + uv + ir + lattice;
    if !(n2 > 0.0) {
        // Name the term pulling n² negative the hardest.
        let term = [("ultraviolet", uv), ("infrared", ir), ("lattice", lattice)]
            .into_iter()
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(t, _)| t)
            .unwrap_or("constant");
        return Err(Error::NegativeIndexSquared { lambda_um, n_squared: n2, term });
    }
    Ok(n2.sqrt())
}

/// Wavenumber `k = n(2πc/ω)·ω/c` (rad/µm) at angular frequency `omega` (rad/fs).
pub fn wavenumber(omega: f64, temperature_k: f64, s: &SellmeierCoefficients) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::invalid("omega", format!("angular frequency must be > 0, got {omega}")));
    }
    let n = refractive_index(omega_to_wavelength(omega), temperature_k, s)?;
    Ok(n * omega / SPEED_OF_LIGHT)
}

/// Phase mismatch `Δk = k_p(ω_s+ω_i) − k_s(ω_s) − k_i(ω_i) − 2π/Λ` (rad/µm).
pub fn delta_k(omega_s: f64, omega_i: f64, crystal: &CrystalConfig) -> Result<f64> {
    let t = crystal.temperature_k;
    let s = &crystal.sellmeier;
    let kp = wavenumber(omega_s + omega_i, t, s)?;
    let ks = wavenumber(omega_s, t, s)?;
    let ki = wavenumber(omega_i, t, s)?;
    Ok(kp - ks - ki - crystal.grating_wavenumber())
}

/// `sinc(ΔkL/2)·exp(iΔkL/2)` for a given mismatch and crystal length in µm.
pub fn phase_matching_from_mismatch(delta_k: f64, length_um: f64) -> Complex64 {
    let x = 0.5 * delta_k * length_um;
    Complex64::from_polar(sinc(x), x)
}

/// Phase-matching amplitude Φ(ω_s, ω_i).
pub fn phase_matching(omega_s: f64, omega_i: f64, crystal: &CrystalConfig) -> Result<Complex64> {
    let dk = delta_k(omega_s, omega_i, crystal)?;
    Ok(phase_matching_from_mismatch(dk, crystal.length_um()))
}

/// An energy-conserving, phase-matched signal/idler pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QpmSolution {
    pub pump_um: f64,
    pub signal_um: f64,
    pub idler_um: f64,
    /// Residual mismatch at the returned pair (rad/µm).
    pub delta_k: f64,
}

impl QpmSolution {
    pub fn signal_omega(&self) -> f64 {
        wavelength_to_omega(self.signal_um)
    }

    pub fn idler_omega(&self) -> f64 {
        wavelength_to_omega(self.pump_um) - self.signal_omega()
    }
}

/// Default signal band scanned for a phase-matching root (µm).
pub const DEFAULT_SIGNAL_BAND_UM: (f64, f64) = (1.1, 2.05);

/// Residual |Δk| below which a root is accepted (rad/µm).
pub const QPM_TOLERANCE: f64 = 1e-9;

/// Solves `Δk = 0` under `ω_p = ω_s + ω_i` on the default signal band.
pub fn solve_qpm(pump_um: f64, crystal: &CrystalConfig) -> Result<QpmSolution> {
    solve_qpm_in_band(pump_um, crystal, DEFAULT_SIGNAL_BAND_UM, QPM_TOLERANCE)
}

/// Solves `Δk = 0` for the non-degenerate branch (`λ_s < 2λ_p`) on the given
/// signal band, clipped to where the idler also lies in the validity window.
pub fn solve_qpm_in_band(
    pump_um: f64,
    crystal: &CrystalConfig,
    band_um: (f64, f64),
    tolerance: f64,
) -> Result<QpmSolution> {
    crystal.validate()?;
    if !(pump_um > 0.0) {
        return Err(Error::invalid("pump_wavelength", format!("must be > 0, got {pump_um}")));
    }
    let omega_p = wavelength_to_omega(pump_um);
    // Idler inside the window requires λ_s ≥ 1/(1/λ_p − 1/λ_max).
    // A relative margin keeps round-off in ω_p − ω_s from leaving the window.
    let idler_limit = 1.0 / (1.0 / pump_um - 1.0 / VALID_MAX_UM) * (1.0 + 1e-9);
    let lo = band_um.0.max(idler_limit).max(VALID_MIN_UM);
    let hi = band_um.1.min(2.0 * pump_um).min(VALID_MAX_UM);
    let no_root = |dk_min: f64, dk_max: f64| Error::NotPhaseMatchable {
        pump_um,
        band_min_um: lo,
        band_max_um: hi,
        dk_min,
        dk_max,
    };
    if !(lo < hi) {
        return Err(no_root(f64::NAN, f64::NAN));
    }

    // Work in signal frequency; the high-frequency end of the band is the
    // short-wavelength end.
    let mismatch = |omega_s: f64| delta_k(omega_s, omega_p - omega_s, crystal);
    let w_hi = wavelength_to_omega(lo);
    let w_lo = wavelength_to_omega(hi);
    const SCAN: usize = 400;
    let mut prev: Option<(f64, f64)> = None;
    let (mut dk_min, mut dk_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut bracket = None;
    for i in 0..=SCAN {
        // Scan from short to long signal wavelength.
        let w = w_hi - (w_hi - w_lo) * i as f64 / SCAN as f64;
        let dk = mismatch(w)?;
        dk_min = dk_min.min(dk);
        dk_max = dk_max.max(dk);
        if let Some((wp, dkp)) = prev {
            if dkp == 0.0 || (dkp < 0.0) != (dk < 0.0) {
                bracket = Some((w, wp));
                break;
            }
        }
        prev = Some((w, dk));
    }
    let (a, b) = bracket.ok_or_else(|| no_root(dk_min, dk_max))?;

    // Δk is smooth and finite inside the window, so the closure cannot fail
    // once the bracket endpoints evaluated.
    let f = |w: f64| mismatch(w).unwrap_or(f64::NAN);
    let omega_s = bisect(f, a, b, tolerance);
    let dk = mismatch(omega_s)?;
    Ok(QpmSolution {
        pump_um,
        signal_um: omega_to_wavelength(omega_s),
        idler_um: omega_to_wavelength(omega_p - omega_s),
        delta_k: dk,
    })
}

/// Default relative frequency step for the group-index finite difference.
pub const GROUP_DELAY_STEP: f64 = 1e-4;

/// Inverse group velocity `dk/dω` (fs/µm) by central difference with step
/// `rel_step·ω`.
pub fn inverse_group_velocity(omega: f64, temperature_k: f64, s: &SellmeierCoefficients, rel_step: f64) -> Result<f64> {
    let h = rel_step * omega;
    let kp = wavenumber(omega + h, temperature_k, s)?;
    let km = wavenumber(omega - h, temperature_k, s)?;
    Ok((kp - km) / (2.0 * h))
}

/// Group-velocity mismatch `1/v_g(λ_a) − 1/v_g(λ_b)` in fs/mm.
pub fn group_velocity_mismatch(lambda_a_um: f64, lambda_b_um: f64, crystal: &CrystalConfig) -> Result<f64> {
    let t = crystal.temperature_k;
    let s = &crystal.sellmeier;
    let a = inverse_group_velocity(wavelength_to_omega(lambda_a_um), t, s, GROUP_DELAY_STEP)?;
    let b = inverse_group_velocity(wavelength_to_omega(lambda_b_um), t, s, GROUP_DELAY_STEP)?;
    Ok((a - b) * 1e3)
}

/// Half-width of the first sinc lobe of `|Φ|²`, i.e. the `Δk` at which
/// `ΔkL/2 = π` (rad/µm).
pub fn first_zero_mismatch(crystal: &CrystalConfig) -> f64 {
    2.0 * PI / crystal.length_um()
}
