//! Brightness/gain relations, thermal-mode photon-number sampling and
//! `g²(0)` mode counting.
//!
//! Sampling uses one ChaCha8 substream per shot (stream id = shot index) keyed
//! by the master seed, so an ensemble is bit-identical regardless of how shots
//! are spread over threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Geometric};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{golden_section, ln_sinh};

/// Pump photon number per pulse above which the brightness curve is treated
/// as saturated and excluded from fits.
pub const DEFAULT_SATURATION_WINDOW: f64 = 1.4e13;

/// `N = sinh²G`.
pub fn mean_photons(gain: f64) -> Result<f64> {
    if !(gain >= 0.0) {
        return Err(Error::invalid("gain", format!("must be ≥ 0, got {gain}")));
    }
    Ok(gain.sinh().powi(2))
}

/// `G = arcsinh(√N)`.
pub fn invert_gain(photons: f64) -> Result<f64> {
    if !(photons >= 0.0) {
        return Err(Error::invalid("photons", format!("must be ≥ 0, got {photons}")));
    }
    Ok(photons.sqrt().asinh())
}

/// Single-mode brightness `sinh²(a√N_P)`.
pub fn brightness(coefficient: f64, pump_photons: f64) -> f64 {
    (coefficient * pump_photons.sqrt()).sinh().powi(2)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BrightnessFit {
    /// `a` in `G = a√N_P`.
    pub coefficient: f64,
    pub points_used: usize,
    /// RMS of `ln N_S − 2 ln sinh(a√N_P)` over the fitted points.
    pub log_residual_rms: f64,
}

/// Least-squares fit of `ln N_S = 2 ln sinh(a√N_P)` over points with
/// `N_P ≤ window_max`.
///
/// Every residual is monotone in `a`, so the optimum lies between the
/// smallest and largest single-point solutions; golden-section search on that
/// bracket runs to a relative tolerance of 1e-8.
pub fn fit_brightness_curve(points: &[(f64, f64)], window_max: f64) -> Result<BrightnessFit> {
    if points.iter().any(|&(np, ns)| !(np > 0.0 && ns > 0.0 && np.is_finite() && ns.is_finite())) {
        return Err(Error::DegenerateFit("all pump and signal photon numbers must be positive and finite".into()));
    }
    let used: Vec<(f64, f64)> = points.iter().copied().filter(|&(np, _)| np <= window_max).collect();
    if used.is_empty() {
        return Err(Error::DegenerateFit(format!("no points with N_P ≤ {window_max:e}")));
    }
    let single: Vec<f64> = used.iter().map(|&(np, ns)| ns.sqrt().asinh() / np.sqrt()).collect();
    let lo = single.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = single.iter().copied().fold(0.0, f64::max);
    let cost = |a: f64| -> f64 { used.iter().map(|&(np, ns)| (ns.ln() - 2.0 * ln_sinh(a * np.sqrt())).powi(2)).sum() };
    let coefficient = if hi - lo <= 1e-15 * hi { lo } else { golden_section(cost, lo, hi, 1e-8) };
    let log_residual_rms = (cost(coefficient) / used.len() as f64).sqrt();
    Ok(BrightnessFit { coefficient, points_used: used.len(), log_residual_rms })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeStatistics {
    /// Exponentially distributed intensity per mode (bright limit).
    Continuous,
    /// Geometric (Bose–Einstein) photon counts per mode.
    BoseEinstein,
}

impl std::str::FromStr for ModeStatistics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" | "exponential" => Ok(Self::Continuous),
            "bose-einstein" | "geometric" => Ok(Self::BoseEinstein),
            other => Err(Error::invalid("statistics", format!("unknown statistics `{other}`"))),
        }
    }
}

/// The RNG for shot `index` under `seed`.
pub fn shot_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShotEnsemble {
    pub photons: Vec<f64>,
    pub seed: u64,
    pub weights: Vec<f64>,
    pub total_mean: f64,
    pub statistics: ModeStatistics,
}

impl ShotEnsemble {
    pub fn len(&self) -> usize {
        self.photons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.photons.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.photons.iter().sum::<f64>() / self.photons.len() as f64
    }

    /// Sample standard deviation.
    pub fn std(&self) -> f64 {
        let m = self.mean();
        let n = self.photons.len() as f64;
        (self.photons.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    }
}

pub(crate) fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("weights", "must be non-empty and non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("weights", format!("must sum to 1, got {total}")));
    }
    Ok(())
}

/// Shot-by-shot photon numbers with exponential per-mode statistics.
pub fn sample_shots(weights: &[f64], total_mean: f64, n_shots: usize, seed: u64) -> Result<ShotEnsemble> {
    sample_shots_with(weights, total_mean, n_shots, seed, ModeStatistics::Continuous)
}

/// Shot-by-shot photon numbers: mode `n` has mean `π_n·N_total` and the
/// chosen statistics; modes are independent and summed per shot.
pub fn sample_shots_with(
    weights: &[f64],
    total_mean: f64,
    n_shots: usize,
    seed: u64,
    statistics: ModeStatistics,
) -> Result<ShotEnsemble> {
    validate_weights(weights)?;
    if !(total_mean > 0.0 && total_mean.is_finite()) {
        return Err(Error::invalid("total_mean", format!("must be > 0, got {total_mean}")));
    }
    if n_shots == 0 {
        return Err(Error::invalid("n_shots", "must be ≥ 1"));
    }
    let means: Vec<f64> = weights.iter().map(|w| w * total_mean).collect();
    let geometric = match statistics {
        ModeStatistics::BoseEinstein => Some(
            means
                .iter()
                .map(|&m| Geometric::new(1.0 / (1.0 + m)).map_err(|e| Error::invalid("weights", e.to_string())))
                .collect::<Result<Vec<_>>>()?,
        ),
        ModeStatistics::Continuous => None,
    };
    let photons = (0..n_shots as u64)
        .into_par_iter()
        .map(|shot| {
            let mut rng = shot_rng(seed, shot);
            match &geometric {
                None => means.iter().map(|&m| m * rng.sample::<f64, _>(Exp1)).sum(),
                Some(dists) => dists.iter().map(|d| rng.sample(d) as f64).sum(),
            }
        })
        .collect();
    Ok(ShotEnsemble { photons, seed, weights: weights.to_vec(), total_mean, statistics })
}

fn moments(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::invalid("ensemble", "needs ≥ 2 shots"));
    }
    let n = samples.len() as f64;
    let (s1, s2) = samples.iter().fold((0.0, 0.0), |(a, b), &x| (a + x, b + x * x));
    let mean = s1 / n;
    if !(mean > 0.0) {
        return Err(Error::ZeroMean);
    }
    Ok((mean, s2 / n))
}

/// `⟨N²⟩/⟨N⟩²`.
pub fn g2_estimator(ens: &ShotEnsemble) -> Result<f64> {
    g2_of(&ens.photons)
}

fn g2_of(samples: &[f64]) -> Result<f64> {
    let (m1, m2) = moments(samples)?;
    Ok(m2 / (m1 * m1))
}

/// `⟨N(N − 1)⟩/⟨N⟩²`, the exact form for discrete counts.
pub fn g2_estimator_exact(ens: &ShotEnsemble) -> Result<f64> {
    let (m1, m2) = moments(&ens.photons)?;
    Ok((m2 - m1) / (m1 * m1))
}

/// Standard error of [`g2_estimator`] from the spread over `batches`
/// contiguous batches.
pub fn g2_standard_error(ens: &ShotEnsemble, batches: usize) -> Result<f64> {
    if batches < 2 || ens.len() < 2 * batches {
        return Err(Error::invalid(
            "batches",
            format!("need 2 ≤ batches ≤ shots/2, got {batches} for {} shots", ens.len()),
        ));
    }
    let size = ens.len() / batches;
    let values = (0..batches).map(|b| g2_of(&ens.photons[b * size..(b + 1) * size])).collect::<Result<Vec<_>>>()?;
    let mean = values.iter().sum::<f64>() / batches as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    Ok((var / batches as f64).sqrt())
}

/// `1 + Σπ_n²`.
pub fn g2_theory(weights: &[f64]) -> Result<f64> {
    validate_weights(weights)?;
    Ok(1.0 + weights.iter().map(|p| p * p).sum::<f64>())
}

/// `K = 1/(g² − 1)`.
pub fn k_from_g2(g2: f64) -> Result<f64> {
    if !(g2 > 1.0) {
        return Err(Error::SubThermal(g2));
    }
    Ok(1.0 / (g2 - 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct G2Summary {
    pub mean: f64,
    pub std: f64,
    pub g2: f64,
    #[serde(rename = "K_g2")]
    pub k_g2: f64,
    pub stderr: f64,
}

pub const DEFAULT_BATCHES: usize = 50;

pub fn summarize(ens: &ShotEnsemble, batches: usize) -> Result<G2Summary> {
    let g2 = g2_estimator(ens)?;
    Ok(G2Summary {
        mean: ens.mean(),
        std: ens.std(),
        g2,
        k_g2: k_from_g2(g2)?,
        stderr: g2_standard_error(ens, batches)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    /// `counts.len() + 1` bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal-width bins on `[0, max(samples)]`.
    pub fn new(samples: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 || samples.is_empty() {
            return Err(Error::invalid("histogram", "needs ≥ 1 bin and ≥ 1 sample"));
        }
        let max = samples.iter().copied().fold(0.0, f64::max);
        let width = if max > 0.0 { max / bins as f64 } else { 1.0 };
        let edges = (0..=bins).map(|i| i as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        for &x in samples {
            let idx = ((x / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Ok(Self { edges, counts })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_low", "bin_high", "count", "density"])?;
        let total: u64 = self.counts.iter().sum();
        for (i, &c) in self.counts.iter().enumerate() {
            let (lo, hi) = (self.edges[i], self.edges[i + 1]);
            let density = c as f64 / (total as f64 * (hi - lo));
            w.write_record([lo.to_string(), hi.to_string(), c.to_string(), density.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

/// Two-sample Kolmogorov–Smirnov statistic (handles ties, so it is valid for
/// discrete counts).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_round_trip() {
        assert_eq!(mean_photons(0.0).unwrap(), 0.0);
        for i in 0..=200 {
            let g = i as f64 * 0.1;
            let back = invert_gain(mean_photons(g).unwrap()).unwrap();
            assert!((back - g).abs() < 1e-10, "G = {g}");
        }
        assert!(mean_photons(-1.0).is_err());
        assert!(invert_gain(-1.0).is_err());
    }

    #[test]
    fn gain_anchors() {
        assert!((invert_gain(1e11).unwrap() - 13.357_365).abs() < 1e-6);
        assert!((invert_gain(1.296e8).unwrap() - 10.03).abs() < 0.01);
    }

    #[test]
    fn brightness_fit_round_trip() {
        let a_true = 3.8e-6;
        let pts: Vec<(f64, f64)> = (1..=12)
            .map(|i| {
                let np = i as f64 * 1e12;
                (np, brightness(a_true, np))
            })
            .collect();
        let fit = fit_brightness_curve(&pts, DEFAULT_SATURATION_WINDOW).unwrap();
        assert!((fit.coefficient - a_true).abs() < 1e-4 * a_true);
        assert_eq!(fit.points_used, 12);
    }

    #[test]
    fn brightness_fit_ignores_saturated_points() {
        let a_true = 3.8e-6;
        let mut pts: Vec<(f64, f64)> = (1..=10)
            .map(|i| {
                let np = i as f64 * 1.2e12;
                (np, brightness(a_true, np))
            })
            .collect();
        // Saturated points far below the unsaturated curve.
        pts.push((1.5e13, 1e9));
        pts.push((1.6e13, 1.1e9));
        let fit = fit_brightness_curve(&pts, DEFAULT_SATURATION_WINDOW).unwrap();
        assert_eq!(fit.points_used, 10);
        assert!((fit.coefficient - a_true).abs() < 1e-4 * a_true);
    }

    #[test]
    fn single_point_defines_coefficient() {
        let np = 4e12;
        let ns = mean_photons(7.6).unwrap();
        let fit = fit_brightness_curve(&[(np, ns)], DEFAULT_SATURATION_WINDOW).unwrap();
        assert!((fit.coefficient - 3.8e-6).abs() < 1e-12);
        // Extrapolates above the published G ≃ 14.5 at 1.6e13.
        assert!((fit.coefficient * 1.6e13f64.sqrt() - 15.2).abs() < 1e-6);
    }

    #[test]
    fn degenerate_fit_inputs() {
        assert!(fit_brightness_curve(&[], 1e13).is_err());
        assert!(fit_brightness_curve(&[(1e12, 0.0)], 1e13).is_err());
        assert!(fit_brightness_curve(&[(2e13, 5.0)], 1e13).is_err());
    }

    #[test]
    fn single_mode_sampling_is_exponential() {
        let ens = sample_shots(&[1.0], 1e8, 1_000_000, 7).unwrap();
        let mean = ens.mean();
        assert!((mean / 1e8 - 1.0).abs() < 0.005);
        assert!((ens.std() / 1e8 - 1.0).abs() < 0.01);
        let ks = ks_statistic(&ens.photons, |x| 1.0 - (-x / 1e8).exp());
        assert!(ks < 0.002, "KS = {ks}");
    }

    #[test]
    fn sampling_is_deterministic_and_seed_dependent() {
        let a = sample_shots(&[0.6, 0.4], 10.0, 1000, 3).unwrap();
        let b = sample_shots(&[0.6, 0.4], 10.0, 1000, 3).unwrap();
        let c = sample_shots(&[0.6, 0.4], 10.0, 1000, 4).unwrap();
        assert_eq!(a.photons, b.photons);
        assert_ne!(a.photons, c.photons);
        // Shot k only depends on (seed, k).
        let short = sample_shots(&[0.6, 0.4], 10.0, 10, 3).unwrap();
        assert_eq!(&a.photons[..10], &short.photons[..]);
    }

    #[test]
    fn sampling_preconditions() {
        assert!(sample_shots(&[1.0], 0.0, 10, 1).is_err());
        assert!(sample_shots(&[0.5, 0.4], 1.0, 10, 1).is_err());
        assert!(sample_shots(&[1.0], 1.0, 0, 1).is_err());
    }

    #[test]
    fn g2_examples() {
        let flat = ShotEnsemble {
            photons: vec![4.0; 3],
            seed: 0,
            weights: vec![1.0],
            total_mean: 4.0,
            statistics: ModeStatistics::Continuous,
        };
        assert_eq!(g2_estimator(&flat).unwrap(), 1.0);
        assert_eq!(g2_theory(&[1.0]).unwrap(), 2.0);
        assert!((g2_theory(&[0.7, 0.2, 0.1]).unwrap() - 1.54).abs() < 1e-15);
        let zero = ShotEnsemble { photons: vec![0.0; 4], ..flat };
        assert!(matches!(g2_estimator(&zero), Err(Error::ZeroMean)));
    }

    #[test]
    fn k_from_g2_examples() {
        assert_eq!(k_from_g2(2.0).unwrap(), 1.0);
        assert_eq!(k_from_g2(1.5).unwrap(), 2.0);
        assert!((k_from_g2(1.95).unwrap() - 1.0526).abs() < 1e-4);
        assert!(matches!(k_from_g2(1.0), Err(Error::SubThermal(_))));
    }

    #[test]
    fn inverse_participation_identity() {
        let w = [0.5, 0.3, 0.15, 0.05];
        let k = k_from_g2(g2_theory(&w).unwrap()).unwrap();
        let ipr = 1.0 / w.iter().map(|p| p * p).sum::<f64>();
        assert!((k - ipr).abs() < 1e-12);
    }

    #[test]
    fn multimode_mc_matches_theory() {
        for k in [1usize, 2, 3, 5, 8] {
            let mut w: Vec<f64> = (0..k).map(|i| 1.0 / (1.0 + i as f64)).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            let ens = sample_shots(&w, 1e6, 200_000, 11 + k as u64).unwrap();
            let g2 = g2_estimator(&ens).unwrap();
            let se = g2_standard_error(&ens, DEFAULT_BATCHES).unwrap();
            let th = g2_theory(&w).unwrap();
            assert!((g2 - th).abs() < 5.0 * se, "K={k}: {g2} vs {th} ± {se}");
        }
    }

    #[test]
    fn discrete_sampler_exact_g2() {
        let ens = sample_shots_with(&[1.0], 3.0, 400_000, 5, ModeStatistics::BoseEinstein).unwrap();
        assert!(ens.photons.iter().all(|x| x.fract() == 0.0));
        let g2 = g2_estimator_exact(&ens).unwrap();
        assert!((g2 - 2.0).abs() < 0.03, "g2 = {g2}");
        assert!((ens.mean() - 3.0).abs() < 0.03);
    }

    #[test]
    fn histogram_counts_everything() {
        let ens = sample_shots(&[1.0], 5.0, 5000, 1).unwrap();
        let h = Histogram::new(&ens.photons, 40).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 5000);
        assert_eq!(h.edges.len(), 41);
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 41);
    }

    #[test]
    fn two_sample_ks_of_identical_sets_is_zero() {
        let a = vec![1.0, 2.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        let b = vec![10.0, 11.0];
        assert_eq!(ks_two_sample(&a, &b), 1.0);
    }
}
