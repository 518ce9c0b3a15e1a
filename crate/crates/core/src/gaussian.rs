//! Gaussian-state toolkit for a product of two-mode squeezers: multimode
//! homodyne difference-quadrature variance (closed form and a symplectic
//! covariance-matrix oracle), photon-number conditioning of the idler, and
//! twin-beam photon-number sampling.
//!
//! Conventions: `X = (a + a†)/√2`, so one vacuum quadrature has variance 1/2
//! and the signal−idler difference of vacua has variance 1. Mode `n` evolves
//! as `a_n → cosh r_n a_n + e^{iφ_n} sinh r_n b_n†`, which gives
//! `⟨a_n b_n⟩ = e^{iφ_n} sinh r_n cosh r_n`. The homodyne mode operator is
//! `A_s = Σ c_n a_n` with `c_n = ⟨u_s|φ_n⟩`, measured as
//! `X_s = (e^{−iθ_s} A_s + h.c.)/√2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::Geometric;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::photonstats::shot_rng;

/// Largest number of modes accepted by [`condition_idler`].
pub const MAX_CONDITION_MODES: usize = 8;
/// Largest conditioned photon number accepted by [`condition_idler`].
pub const MAX_CONDITION_PHOTONS: u32 = 20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TmssState {
    squeezing: Vec<f64>,
    phases: Vec<f64>,
}

impl TmssState {
    pub fn new(squeezing: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        if squeezing.len() != phases.len() {
            return Err(Error::invalid("phases", format!("{} phases for {} modes", phases.len(), squeezing.len())));
        }
        if squeezing.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::invalid("squeezing", "every r_n must be finite and ≥ 0"));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("phases", "must be finite"));
        }
        Ok(Self { squeezing, phases })
    }

    /// Real squeezing with all phases zero.
    pub fn real(squeezing: Vec<f64>) -> Result<Self> {
        let n = squeezing.len();
        Self::new(squeezing, vec![0.0; n])
    }

    /// From `μ_n = e^{iφ_n} tanh r_n`, requiring `|μ_n| < 1`.
    pub fn from_mu(mu: &[Complex64]) -> Result<Self> {
        if mu.iter().any(|m| !(m.norm() < 1.0)) {
            return Err(Error::invalid("mu", "every |μ_n| must be < 1"));
        }
        Self::new(mu.iter().map(|m| m.norm().atanh()).collect(), mu.iter().map(|m| m.arg()).collect())
    }

    pub fn squeezing(&self) -> &[f64] {
        &self.squeezing
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn modes(&self) -> usize {
        self.squeezing.len()
    }

    pub fn mu(&self) -> Vec<Complex64> {
        self.squeezing.iter().zip(&self.phases).map(|(r, p)| Complex64::from_polar(r.tanh(), *p)).collect()
    }

    /// `sinh²r_n` per mode.
    pub fn mean_photons(&self) -> Vec<f64> {
        self.squeezing.iter().map(|r| r.sinh().powi(2)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoProjection {
    pub c: Vec<Complex64>,
    pub d: Vec<Complex64>,
    pub theta_s: f64,
    pub theta_i: f64,
}

/// Slack on `Σ|c|² ≤ 1` for coefficients computed numerically.
const NORM_SLACK: f64 = 1e-9;

impl LoProjection {
    pub fn new(c: Vec<Complex64>, d: Vec<Complex64>, theta_s: f64, theta_i: f64) -> Result<Self> {
        if c.len() != d.len() {
            return Err(Error::invalid("d", format!("{} idler overlaps for {} signal overlaps", d.len(), c.len())));
        }
        for (name, v) in [("c", &c), ("d", &d)] {
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            if !(norm <= 1.0 + NORM_SLACK) {
                return Err(Error::invalid(name, format!("Σ|·|² = {norm} exceeds 1")));
            }
        }
        Ok(Self { c, d, theta_s, theta_i })
    }

    fn check_state(&self, state: &TmssState) -> Result<()> {
        if self.c.len() != state.modes() {
            return Err(Error::AxisMismatch(format!(
                "projection has {} coefficients, state has {} modes",
                self.c.len(),
                state.modes()
            )));
        }
        Ok(())
    }

    fn signal_weight(&self) -> f64 {
        self.c.iter().map(|z| z.norm_sqr()).sum()
    }

    fn idler_weight(&self) -> f64 {
        self.d.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// `c_n = Σ_j u*(ω_j) φ_n(ω_j)` for a unit-norm LO `u` and the columns of
/// `modes`, both sampled on the same axis.
pub fn overlap_coefficients(lo_mode: &[Complex64], modes: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    if lo_mode.len() != modes.nrows() {
        return Err(Error::AxisMismatch(format!("LO has {} samples, modes have {}", lo_mode.len(), modes.nrows())));
    }
    let norm: f64 = lo_mode.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("lo_mode", format!("must be unit-norm, Σ|u|² = {norm}")));
    }
    Ok(modes.column_iter().map(|phi| lo_mode.iter().zip(phi.iter()).map(|(u, p)| u.conj() * p).sum()).collect())
}

/// Variance of `X_s − X_i`:
/// `1 + Σ(|c_n|² + |d_n|²) sinh²r_n − 2 Re[e^{−i(θ_s+θ_i)} Σ c_n d_n e^{iφ_n} sinh r_n cosh r_n]`.
///
/// Parts of the LO outside the Schmidt-mode span see vacuum, so the constant
/// term is 1 for sub-normalized projections too.
pub fn difference_quadrature_variance(state: &TmssState, proj: &LoProjection) -> Result<f64> {
    proj.check_state(state)?;
    let mut incoherent = 0.0;
    let mut cross = Complex64::new(0.0, 0.0);
    for n in 0..state.modes() {
        let r = state.squeezing[n];
        let (s, ch) = (r.sinh(), r.cosh());
        incoherent += (proj.c[n].norm_sqr() + proj.d[n].norm_sqr()) * s * s;
        cross += proj.c[n] * proj.d[n] * Complex64::from_polar(s * ch, state.phases[n]);
    }
    let lo_phase = Complex64::from_polar(1.0, -(proj.theta_s + proj.theta_i));
    Ok(1.0 + incoherent - 2.0 * (lo_phase * cross).re)
}

/// Real symplectic matrix, in `(x₁…x_N, p₁…p_N)` ordering, of the Bogoliubov
/// map `a' = αa + βa†`.
fn symplectic_from_bogoliubov(alpha: &DMatrix<Complex64>, beta: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = alpha.nrows();
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let plus = alpha[(i, j)] + beta[(i, j)];
            let minus = alpha[(i, j)] - beta[(i, j)];
            s[(i, j)] = plus.re;
            s[(i, j + n)] = -minus.im;
            s[(i + n, j)] = plus.im;
            s[(i + n, j + n)] = minus.re;
        }
    }
    s
}

/// Quadrature covariance matrix (`(x, p)` ordering, symmetrized, vacuum =
/// I/2) of the state plus one vacuum ancilla per arm. Mode order is
/// `a₁…a_M, b₁…b_M, ancilla_s, ancilla_i`.
pub fn covariance_matrix(state: &TmssState) -> DMatrix<f64> {
    let m = state.modes();
    let n = 2 * m + 2;
    let mut alpha = DMatrix::<Complex64>::identity(n, n);
    let mut beta = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..m {
        let r = state.squeezing[k];
        let ch = Complex64::new(r.cosh(), 0.0);
        let sh = Complex64::from_polar(r.sinh(), state.phases[k]);
        alpha[(k, k)] = ch;
        alpha[(m + k, m + k)] = ch;
        beta[(k, m + k)] = sh;
        beta[(m + k, k)] = sh;
    }
    let s = symplectic_from_bogoliubov(&alpha, &beta);
    &s * s.transpose() * 0.5
}

/// The difference variance from the full covariance matrix. Independent of
/// [`difference_quadrature_variance`]; the two must agree.
pub fn covariance_oracle_variance(state: &TmssState, proj: &LoProjection) -> Result<f64> {
    proj.check_state(state)?;
    let m = state.modes();
    let n = 2 * m + 2;
    // Each operator Σγ_k a_k + h.c. over √2 is the real functional Re(γ)·x − Im(γ)·p.
    let mut gamma = vec![Complex64::new(0.0, 0.0); n];
    let lo_s = Complex64::from_polar(1.0, -proj.theta_s);
    let lo_i = Complex64::from_polar(1.0, -proj.theta_i);
    for k in 0..m {
        gamma[k] = proj.c[k] * lo_s;
        gamma[m + k] = -proj.d[k] * lo_i;
    }
    gamma[2 * m] = Complex64::new((1.0 - proj.signal_weight()).max(0.0).sqrt(), 0.0);
    gamma[2 * m + 1] = Complex64::new(-(1.0 - proj.idler_weight()).max(0.0).sqrt(), 0.0);
    let g = DVector::from_fn(2 * n, |i, _| if i < n { gamma[i].re } else { -gamma[i - n].im });
    let v = covariance_matrix(state);
    Ok((g.transpose() * v * g)[(0, 0)])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionedIdler {
    pub photons: u32,
    /// Idler occupation patterns `{k_n}` with `Σk_n = N` and non-zero weight,
    /// in lexicographic order (mode 0 most significant, descending).
    pub patterns: Vec<Vec<u32>>,
    pub weights: Vec<f64>,
    pub purity: f64,
}

/// Calls `f` for each composition of `total` into `parts` non-negative parts.
fn for_each_composition(parts: usize, total: u32, f: &mut impl FnMut(&[u32])) {
    fn rec(buf: &mut Vec<u32>, parts: usize, remaining: u32, f: &mut impl FnMut(&[u32])) {
        if buf.len() + 1 == parts {
            buf.push(remaining);
            f(buf);
            buf.pop();
            return;
        }
        for k in (0..=remaining).rev() {
            buf.push(k);
            rec(buf, parts, remaining - k, f);
            buf.pop();
        }
    }
    if parts == 0 {
        if total == 0 {
            f(&[]);
        }
        return;
    }
    rec(&mut Vec::with_capacity(parts), parts, total, f);
}

/// Idler state after detecting `photons` signal photons: the diagonal mixture
/// `Σ_{Σk=N} w_k |{k}⟩⟨{k}|` with `w_k ∝ Π|μ_n|^{2k_n}`.
///
/// `cutoff` is the per-mode Fock cutoff of the caller's truncation and must be
/// at least `photons`. Patterns of zero weight (a mode with `μ_n = 0` holding
/// photons) are omitted.
pub fn condition_idler(state: &TmssState, photons: u32, cutoff: u32) -> Result<ConditionedIdler> {
    let m = state.modes();
    if m == 0 {
        return Err(Error::invalid("state", "has no modes"));
    }
    if cutoff < photons {
        return Err(Error::invalid("cutoff", format!("must be ≥ N = {photons}, got {cutoff}")));
    }
    if m > MAX_CONDITION_MODES || photons > MAX_CONDITION_PHOTONS {
        return Err(Error::EnumerationTooLarge {
            modes: m,
            photons,
            max_modes: MAX_CONDITION_MODES,
            max_photons: MAX_CONDITION_PHOTONS,
        });
    }
    let ln_mu2: Vec<f64> = state.mu().iter().map(|z| 2.0 * z.norm().ln()).collect();
    let mut patterns = Vec::new();
    let mut log_w = Vec::new();
    for_each_composition(m, photons, &mut |k| {
        let lw: f64 = k.iter().zip(&ln_mu2).filter(|(k, _)| **k > 0).map(|(k, l)| *k as f64 * l).sum();
        if lw > f64::NEG_INFINITY {
            patterns.push(k.to_vec());
            log_w.push(lw);
        }
    });
    if patterns.is_empty() {
        return Err(Error::ImpossibleCondition { photons });
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let purity = weights.iter().map(|w| w * w).sum();
    Ok(ConditionedIdler { photons, patterns, weights, purity })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwinShots {
    pub signal: Vec<f64>,
    pub idler: Vec<f64>,
    pub seed: u64,
}

/// Per-shot arm photon totals of the lossless twin beam: each mode draws one
/// Bose–Einstein count `k_n` (mean `sinh²r_n`) shared by signal and idler.
pub fn twin_number_correlation(state: &TmssState, n_shots: usize, seed: u64) -> Result<TwinShots> {
    if n_shots == 0 {
        return Err(Error::invalid("n_shots", "must be ≥ 1"));
    }
    let dists = state
        .mean_photons()
        .iter()
        .map(|&m| Geometric::new(1.0 / (1.0 + m)).map_err(|e| Error::invalid("squeezing", e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let totals: Vec<f64> = (0..n_shots as u64)
        .into_par_iter()
        .map(|shot| {
            let mut rng = shot_rng(seed, shot);
            dists.iter().map(|d| rng.sample(d) as f64).sum()
        })
        .collect();
    Ok(TwinShots { signal: totals.clone(), idler: totals, seed })
}
