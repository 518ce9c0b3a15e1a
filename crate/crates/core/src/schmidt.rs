//! Schmidt decomposition of a JSA and the high-gain repopulation of its modes.
//!
//! Modes are stored as unit-norm sample vectors on the grid axes (no `dω`
//! weights). The decomposition only ever sees `J`, so mode functions are
//! gain-independent; gain enters solely through [`high_gain_populations`].

use std::f64::consts::TAU;

use faer::Mat;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jsa::JsaMatrix;
use crate::numeric::ln_sinh;

/// Relative cutoff below which Schmidt eigenvalues are treated as zero before
/// population and entropy sums.
pub const TRUNCATION: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtSpectrum {
    /// Descending, summing to one.
    pub eigenvalues: Vec<f64>,
    /// Columns are the signal modes φ_n sampled on `signal_axis`.
    pub signal_modes: DMatrix<Complex64>,
    /// Columns are the idler modes ψ_n sampled on `idler_axis`.
    pub idler_modes: DMatrix<Complex64>,
    pub signal_axis: Vec<f64>,
    pub idler_axis: Vec<f64>,
}

impl SchmidtSpectrum {
    /// `Σ √λ_n φ_n ψ_nᵀ`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.signal_modes.nrows(), self.idler_modes.nrows());
        for (n, &lam) in self.eigenvalues.iter().enumerate() {
            let amp = Complex64::new(lam.sqrt(), 0.0);
            out += self.signal_modes.column(n) * self.idler_modes.column(n).transpose() * amp;
        }
        out
    }

    pub fn schmidt_number(&self) -> Result<f64> {
        schmidt_number(&self.eigenvalues)
    }
}

fn to_faer(values: &DMatrix<Complex64>) -> Mat<Complex64> {
    Mat::from_fn(values.nrows(), values.ncols(), |i, j| values[(i, j)])
}

struct ThinSvd {
    singular_values: Vec<f64>,
    u: DMatrix<Complex64>,
    v: DMatrix<Complex64>,
}

fn svd(values: &DMatrix<Complex64>) -> Result<ThinSvd> {
    let (rows, cols) = values.shape();
    let svd = to_faer(values).thin_svd().map_err(|_| Error::SvdNoConvergence { rows, cols })?;
    let (u, v) = (svd.U(), svd.V());
    let s = svd.S().column_vector();
    Ok(ThinSvd {
        singular_values: (0..s.nrows()).map(|k| s[k].re).collect(),
        u: DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)]),
        v: DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)]),
    })
}

fn singular_values(values: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    let (rows, cols) = values.shape();
    to_faer(values).singular_values().map_err(|_| Error::SvdNoConvergence { rows, cols })
}

fn normalize_spectrum(singular: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut lam: Vec<f64> = singular.map(|s| s * s).collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = lam.iter().sum();
    lam.iter_mut().for_each(|l| *l /= total);
    lam
}

/// Full Schmidt decomposition `J = Σ √λ_n φ_n(ω_s) ψ_n(ω_i)`.
///
/// Each signal mode is rotated so its largest-magnitude sample is real and
/// positive; the paired idler mode carries the compensating phase.
pub fn decompose(jsa: &JsaMatrix) -> Result<SchmidtSpectrum> {
    let svd = svd(&jsa.values)?;
    let (u, v) = (&svd.u, &svd.v);
    let rank = svd.singular_values.len();
    let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroNorm);
    }

    // J = U Σ V†, so J_ij = Σ_n s_n U_in conj(V_jn): φ_n = U[:, n], ψ_n = conj(V[:, n]).
    let mut signal = DMatrix::zeros(u.nrows(), rank);
    let mut idler = DMatrix::zeros(v.nrows(), rank);
    let mut eigenvalues = Vec::with_capacity(rank);
    for n in 0..rank {
        let mut phi = u.column(n).clone_owned();
        let mut psi = v.column(n).map(|z| z.conj());
        let (imax, _) = phi.iter().enumerate().fold((0, -1.0), |(bi, bv), (i, z)| {
            let m = z.norm_sqr();
            if m > bv {
                (i, m)
            } else {
                (bi, bv)
            }
        });
        let rot = Complex64::from_polar(1.0, -phi[imax].arg());
        phi *= rot;
        psi *= rot.conj();
        signal.set_column(n, &phi);
        idler.set_column(n, &psi);
        eigenvalues.push(svd.singular_values[n] * svd.singular_values[n] / total);
    }
    Ok(SchmidtSpectrum {
        eigenvalues,
        signal_modes: signal,
        idler_modes: idler,
        signal_axis: jsa.grid.signal().to_vec(),
        idler_axis: jsa.grid.idler().to_vec(),
    })
}

/// Schmidt eigenvalues only (descending, normalized), skipping the singular
/// vectors.
pub fn schmidt_eigenvalues(jsa: &JsaMatrix) -> Result<Vec<f64>> {
    let lam = normalize_spectrum(singular_values(&jsa.values)?.into_iter());
    if lam.iter().any(|l| !l.is_finite()) {
        return Err(Error::ZeroNorm);
    }
    Ok(lam)
}

/// Drops eigenvalues below `TRUNCATION·λ_max`.
pub fn truncate(eigenvalues: &[f64]) -> Vec<f64> {
    let max = eigenvalues.iter().copied().fold(0.0, f64::max);
    eigenvalues.iter().copied().filter(|&l| l > TRUNCATION * max).collect()
}

/// `K = 1/Σλ_n²`.
pub fn schmidt_number(eigenvalues: &[f64]) -> Result<f64> {
    if eigenvalues.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let purity: f64 = eigenvalues.iter().map(|l| l * l).sum();
    if !(purity > 0.0) {
        return Err(Error::EmptySpectrum);
    }
    Ok(1.0 / purity)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HighGainPopulation {
    pub gain: f64,
    /// Per-mode squeezing `r_n = G√λ_n`.
    pub squeezing: Vec<f64>,
    /// Mean photons per mode, `sinh²r_n`.
    pub photons: Vec<f64>,
    /// `π_n = N_n / Σ N_m`.
    pub weights: Vec<f64>,
}

impl HighGainPopulation {
    /// Populations given directly as mean photon numbers.
    pub fn from_photons(photons: Vec<f64>) -> Result<Self> {
        if photons.iter().any(|n| !(*n >= 0.0)) {
            return Err(Error::invalid("photons", "mean photon numbers must be ≥ 0"));
        }
        let total: f64 = photons.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroGain);
        }
        let squeezing = photons.iter().map(|n| n.sqrt().asinh()).collect();
        let weights = photons.iter().map(|n| n / total).collect();
        Ok(Self { gain: f64::NAN, squeezing, photons, weights })
    }
}

/// Repopulates a Schmidt spectrum at gain `G` with `r_n = G√λ_n`.
///
/// Weights are formed in log space so they stay finite when `sinh²r_n`
/// overflows.
pub fn high_gain_populations(eigenvalues: &[f64], gain: f64) -> Result<HighGainPopulation> {
    if !(gain >= 0.0) || !gain.is_finite() {
        return Err(Error::invalid("gain", format!("must be finite and ≥ 0, got {gain}")));
    }
    let lam = truncate(eigenvalues);
    if lam.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    if gain == 0.0 {
        return Err(Error::ZeroGain);
    }
    let squeezing: Vec<f64> = lam.iter().map(|l| gain * l.sqrt()).collect();
    let photons: Vec<f64> = squeezing.iter().map(|r| r.sinh().powi(2)).collect();
    let ln_n: Vec<f64> = squeezing.iter().map(|&r| 2.0 * ln_sinh(r)).collect();
    let ln_max = ln_n.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_total = ln_max + ln_n.iter().map(|x| (x - ln_max).exp()).sum::<f64>().ln();
    let weights = ln_n.iter().map(|x| (x - ln_total).exp()).collect();
    Ok(HighGainPopulation { gain, squeezing, photons, weights })
}

/// `K_HG = 1/Σπ_n²`.
pub fn k_high_gain(pop: &HighGainPopulation) -> f64 {
    1.0 / pop.weights.iter().map(|p| p * p).sum::<f64>()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeProfile {
    /// Time axis (fs), centered on zero.
    pub time: Vec<f64>,
    pub amplitude: Vec<Complex64>,
}

/// Unitary DFT of a spectral mode to the time domain,
/// `f(t_m) = N^{-1/2} Σ_j F(Ω_j) e^{−iΩ_j t_m}`, with detunings `Ω_j` taken
/// from the axis center and `Δt = 2π/(N Δω)`.
pub fn mode_time_profile(mode: &[Complex64], axis: &[f64]) -> Result<TimeProfile> {
    let n = axis.len();
    if mode.len() != n {
        return Err(Error::AxisMismatch(format!("mode has {} samples, axis has {n}", mode.len())));
    }
    if n < 2 {
        return Err(Error::NonUniformAxis);
    }
    let step = (axis[n - 1] - axis[0]) / (n - 1) as f64;
    let uniform = step > 0.0 && axis.windows(2).all(|w| ((w[1] - w[0]) - step).abs() <= 1e-6 * step);
    if !uniform {
        return Err(Error::NonUniformAxis);
    }
    let c = n / 2;
    let dt = TAU / (n as f64 * step);
    // (j−c)(m−c) = jm − cj − cm + c², so pre- and post-multiply by phases
    // around a plain forward FFT.
    let phase = |k: usize| Complex64::from_polar(1.0, TAU * (c * k) as f64 / n as f64);
    let mut buf: Vec<Complex64> = mode.iter().enumerate().map(|(j, &z)| z * phase(j)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let global = Complex64::from_polar(1.0 / (n as f64).sqrt(), -TAU * (c * c) as f64 / n as f64);
    let amplitude = buf.iter().enumerate().map(|(m, &z)| z * phase(m) * global).collect();
    let time = (0..n).map(|m| (m as f64 - c as f64) * dt).collect();
    Ok(TimeProfile { time, amplitude })
}
