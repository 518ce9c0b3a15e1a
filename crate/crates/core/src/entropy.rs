//! Linear-entropy accounting for the reduced signal state of independent
//! two-mode squeezers: per-mode, total, occupational and modal parts.
//!
//! The occupational part is the `π_n²`-weighted sum of per-mode entropies and
//! the modal part is whatever remains of the total. The bright few-mode
//! partition `(1 − 1/K, 1/K)` is a consequence checked in tests, not a
//! definition used here.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::schmidt::HighGainPopulation;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyReport {
    pub s_total: f64,
    pub s_occ: f64,
    pub s_mod: f64,
    /// `1 − Σπ_n²`, the linear classical entropy of the weights.
    pub h_lin: f64,
    pub per_mode: Vec<f64>,
}

/// `S_n = 2N/(2N + 1)`.
pub fn mode_linear_entropy(photons: f64) -> Result<f64> {
    if !(photons >= 0.0) {
        return Err(Error::invalid("photons", format!("mean photon number must be ≥ 0, got {photons}")));
    }
    if photons.is_infinite() {
        return Ok(1.0);
    }
    Ok(2.0 * photons / (2.0 * photons + 1.0))
}

/// `Σ π_n² S_n`.
pub fn occupational_entropy(pop: &HighGainPopulation) -> Result<f64> {
    pop.weights.iter().zip(&pop.photons).map(|(p, &n)| Ok(p * p * mode_linear_entropy(n)?)).sum()
}

/// `1 − Π_n 1/(2N_n + 1)`.
pub fn total_entropy(photons: &[f64]) -> Result<f64> {
    let mut purity = 1.0;
    for &n in photons {
        if !(n >= 0.0) {
            return Err(Error::invalid("photons", format!("mean photon number must be ≥ 0, got {n}")));
        }
        purity /= 2.0 * n + 1.0;
    }
    Ok(1.0 - purity)
}

pub fn modal_entropy(pop: &HighGainPopulation) -> Result<f64> {
    Ok(total_entropy(&pop.photons)? - occupational_entropy(pop)?)
}

pub fn report(pop: &HighGainPopulation) -> Result<EntropyReport> {
    let per_mode = pop.photons.iter().map(|&n| mode_linear_entropy(n)).collect::<Result<Vec<_>>>()?;
    let s_total = total_entropy(&pop.photons)?;
    let s_occ: f64 = pop.weights.iter().zip(&per_mode).map(|(p, s)| p * p * s).sum();
    let h_lin = 1.0 - pop.weights.iter().map(|p| p * p).sum::<f64>();
    Ok(EntropyReport { s_total, s_occ, s_mod: s_total - s_occ, h_lin, per_mode })
}

/// `(K − 1)/K`, the modal entropy implied by an effective mode number.
pub fn modal_entropy_from_k(k: f64) -> f64 {
    (k - 1.0) / k
}
