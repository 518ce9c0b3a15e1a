//! Schmidt-number estimation from shot-to-shot intensity spectra.
//!
//! For a Gaussian field with non-negative real `G⁽¹⁾`, the intensity
//! covariance is `|G⁽¹⁾(ω, ω′)|²`, so the element-wise square root of
//! `max(Cov, 0)` recovers `G⁽¹⁾`. That inversion is exact for modes with
//! disjoint spectral support and biased when overlapping modes give
//! `G⁽¹⁾` changing sign; the eigenvalues of the estimate then include
//! spurious negative parts, which are clipped before forming `K`.

use std::io::{Read, Write};

use faer::{Mat, Side};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::photonstats::shot_rng;

/// Subsets used by [`bootstrap_k`] unless told otherwise.
pub const DEFAULT_BOOTSTRAP_SUBSETS: usize = 60;

/// Shots per bin below which the covariance estimate is flagged.
pub const RECOMMENDED_SHOTS_PER_BIN: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectraEnsemble {
    /// `n_shots × n_bins`.
    pub intensities: DMatrix<f64>,
    pub axis: Vec<f64>,
    pub seed: Option<u64>,
}

impl SpectraEnsemble {
    pub fn new(intensities: DMatrix<f64>, axis: Vec<f64>, seed: Option<u64>) -> Result<Self> {
        if intensities.ncols() != axis.len() {
            return Err(Error::AxisMismatch(format!(
                "{} spectral bins but {} axis points",
                intensities.ncols(),
                axis.len()
            )));
        }
        if intensities.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::invalid("intensities", "must be finite and non-negative"));
        }
        Ok(Self { intensities, axis, seed })
    }

    pub fn shots(&self) -> usize {
        self.intensities.nrows()
    }

    pub fn bins(&self) -> usize {
        self.intensities.ncols()
    }

    /// Shot-averaged spectrum.
    pub fn mean_spectrum(&self) -> Vec<f64> {
        let n = self.shots() as f64;
        self.intensities.column_iter().map(|c| c.sum() / n).collect()
    }

    /// Contiguous shots `start..start + len` as a new ensemble.
    pub fn subset(&self, start: usize, len: usize) -> Self {
        Self { intensities: self.intensities.rows(start, len).into_owned(), axis: self.axis.clone(), seed: self.seed }
    }

    /// CSV with the frequency axis as the header and one shot per row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.axis.iter().map(|x| x.to_string()))?;
        for row in self.intensities.row_iter() {
            w.write_record(row.iter().map(|x| x.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format of [`SpectraEnsemble::write_csv`]. Lines starting
    /// with `#` are ignored.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).from_reader(input);
        let parse = |field: &str, what: &str| -> Result<f64> {
            field.trim().parse::<f64>().map_err(|_| Error::Config(format!("non-numeric {what} `{field}`")))
        };
        let axis = reader.headers()?.iter().map(|f| parse(f, "axis value")).collect::<Result<Vec<_>>>()?;
        let mut values = Vec::new();
        let mut rows = 0;
        for record in reader.records() {
            let record = record?;
            if record.len() != axis.len() {
                return Err(Error::AxisMismatch(format!(
                    "shot {rows} has {} bins, header has {}",
                    record.len(),
                    axis.len()
                )));
            }
            for f in record.iter() {
                values.push(parse(f, "intensity")?);
            }
            rows += 1;
        }
        if rows == 0 {
            return Err(Error::Config("spectra file has no shots".into()));
        }
        Self::new(DMatrix::from_row_slice(rows, axis.len(), &values), axis, None)
    }
}

fn check_modes(modes: &DMatrix<Complex64>, populations: &[f64], axis: &[f64]) -> Result<()> {
    if modes.nrows() != axis.len() {
        return Err(Error::AxisMismatch(format!("modes have {} samples, axis has {}", modes.nrows(), axis.len())));
    }
    if modes.ncols() != populations.len() {
        return Err(Error::invalid(
            "populations",
            format!("{} populations for {} modes", populations.len(), modes.ncols()),
        ));
    }
    if populations.iter().any(|n| !(*n >= 0.0 && n.is_finite())) {
        return Err(Error::invalid("populations", "must be finite and ≥ 0"));
    }
    let gram = modes.adjoint() * modes;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            if (gram[(i, j)] - Complex64::new(target, 0.0)).norm() > 1e-6 {
                return Err(Error::invalid("modes", "columns must be orthonormal"));
            }
        }
    }
    Ok(())
}

/// Shot spectra `I(ω_j) = |Σ_n a_n φ_n(ω_j)|²` with independent circular
/// Gaussian `a_n`, `⟨|a_n|²⟩ = N_n`. Shot `k` uses substream `k` of `seed`.
pub fn simulate_shot_spectra(
    modes: &DMatrix<Complex64>,
    populations: &[f64],
    axis: &[f64],
    n_shots: usize,
    seed: u64,
) -> Result<SpectraEnsemble> {
    simulate_noisy_shot_spectra(modes, populations, axis, n_shots, seed, 0.0)
}

/// As [`simulate_shot_spectra`], plus independent zero-mean Gaussian noise of
/// standard deviation `noise_std` per bin, with negative readings clipped to
/// zero.
pub fn simulate_noisy_shot_spectra(
    modes: &DMatrix<Complex64>,
    populations: &[f64],
    axis: &[f64],
    n_shots: usize,
    seed: u64,
    noise_std: f64,
) -> Result<SpectraEnsemble> {
    check_modes(modes, populations, axis)?;
    if n_shots == 0 {
        return Err(Error::invalid("n_shots", "must be ≥ 1"));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::invalid("noise_std", format!("must be finite and ≥ 0, got {noise_std}")));
    }
    let bins = axis.len();
    let scale: Vec<f64> = populations.iter().map(|n| (0.5 * n).sqrt()).collect();
    let rows: Vec<Vec<f64>> = (0..n_shots as u64)
        .into_par_iter()
        .map(|shot| {
            let mut rng = shot_rng(seed, shot);
            let amps: Vec<Complex64> = scale
                .iter()
                .map(|s| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im) * *s
                })
                .collect();
            (0..bins)
                .map(|j| {
                    let field: Complex64 = amps.iter().enumerate().map(|(n, a)| a * modes[(j, n)]).sum();
                    let mut value = field.norm_sqr();
                    if noise_std > 0.0 {
                        let e: f64 = rng.sample(StandardNormal);
                        value = (value + noise_std * e).max(0.0);
                    }
                    value
                })
                .collect()
        })
        .collect();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    SpectraEnsemble::new(DMatrix::from_row_slice(n_shots, bins, &flat), axis.to_vec(), Some(seed))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct G1Estimate {
    /// `√max(Cov, 0)`, symmetric.
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
    /// Eigenvalues of `matrix`, descending, before clipping.
    pub raw_eigenvalues: Vec<f64>,
    /// Non-negative eigenvalues normalized to sum to one.
    pub weights: Vec<f64>,
    #[serde(rename = "K")]
    pub k: f64,
    pub warning: Option<String>,
}

/// Unbiased intensity covariance over shots.
pub fn intensity_covariance(ens: &SpectraEnsemble) -> Result<DMatrix<f64>> {
    let n = ens.shots();
    if n < 2 {
        return Err(Error::invalid("ensemble", "needs ≥ 2 shots"));
    }
    let mean = ens.mean_spectrum();
    let mut centered = ens.intensities.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    Ok(centered.transpose() * &centered / (n as f64 - 1.0))
}

fn symmetric_eigenvalues_descending(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let f = Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let mut values = f.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::DegenerateCovariance)?;
    values.reverse();
    Ok(values)
}

/// `|G⁽¹⁾|` estimate and the Schmidt number `K = 1/Σ(σ_n/Σσ_m)²` over its
/// non-negative eigenvalues.
pub fn g1_from_covariance(ens: &SpectraEnsemble) -> Result<G1Estimate> {
    let cov = intensity_covariance(ens)?;
    let matrix = DMatrix::from_fn(cov.nrows(), cov.ncols(), |i, j| {
        // Average the two triangles so the estimate is exactly symmetric.
        (0.5 * (cov[(i, j)] + cov[(j, i)])).max(0.0).sqrt()
    });
    if !matrix.iter().any(|x| *x > 0.0) {
        return Err(Error::DegenerateCovariance);
    }
    let raw_eigenvalues = symmetric_eigenvalues_descending(&matrix)?;
    let positive: Vec<f64> = raw_eigenvalues.iter().map(|s| s.max(0.0)).collect();
    let total: f64 = positive.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateCovariance);
    }
    let weights: Vec<f64> = positive.iter().map(|s| s / total).collect();
    let k = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    let warning = (ens.shots() < RECOMMENDED_SHOTS_PER_BIN * ens.bins()).then(|| {
        format!(
            "{} shots for {} bins is below the recommended {}× bins; the covariance is poorly conditioned",
            ens.shots(),
            ens.bins(),
            RECOMMENDED_SHOTS_PER_BIN
        )
    });
    Ok(G1Estimate { matrix, raw_eigenvalues, weights, k, warning })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BootstrapK {
    #[serde(rename = "K_mean")]
    pub mean: f64,
    #[serde(rename = "K_std")]
    pub std: f64,
    pub subset_values: Vec<f64>,
    pub shots_per_subset: usize,
    pub warning: Option<String>,
}

/// Mean and sample standard deviation of `K` over `n_subsets` disjoint,
/// contiguous shot subsets (left-over shots are unused).
pub fn bootstrap_k(ens: &SpectraEnsemble, n_subsets: usize) -> Result<BootstrapK> {
    if n_subsets < 2 {
        return Err(Error::invalid("n_subsets", format!("must be ≥ 2, got {n_subsets}")));
    }
    let size = ens.shots() / n_subsets;
    if size < 2 {
        return Err(Error::invalid(
            "n_subsets",
            format!("{} shots cannot fill {n_subsets} subsets of ≥ 2 shots", ens.shots()),
        ));
    }
    let subset_values = (0..n_subsets)
        .into_par_iter()
        .map(|s| g1_from_covariance(&ens.subset(s * size, size)).map(|g| g.k))
        .collect::<Result<Vec<_>>>()?;
    let n = n_subsets as f64;
    let mean = subset_values.iter().sum::<f64>() / n;
    let std = (subset_values.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let warning = (size < ens.bins())
        .then(|| format!("subsets of {size} shots are smaller than the {} spectral bins", ens.bins()));
    Ok(BootstrapK { mean, std, subset_values, shots_per_subset: size, warning })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Orthonormal Hermite–Gauss modes on a uniform axis.
    fn hermite_gauss(bins: usize, count: usize, width: f64) -> (Vec<f64>, DMatrix<Complex64>) {
        let axis: Vec<f64> = (0..bins).map(|i| (i as f64 - (bins as f64 - 1.0) / 2.0) / width).collect();
        let mut m = DMatrix::<f64>::zeros(bins, count);
        for (j, &x) in axis.iter().enumerate() {
            let g = (-x * x / 2.0).exp();
            let (mut h0, mut h1) = (1.0, 2.0 * x);
            for n in 0..count {
                let h = match n {
                    0 => h0,
                    1 => h1,
                    _ => {
                        let h2 = 2.0 * x * h1 - 2.0 * (n as f64 - 1.0) * h0;
                        h0 = h1;
                        h1 = h2;
                        h2
                    }
                };
                m[(j, n)] = h * g;
            }
        }
        for mut col in m.column_iter_mut() {
            let norm = col.norm();
            col /= norm;
        }
        (axis, m.map(|x| Complex64::new(x, 0.0)))
    }

    fn disjoint_blocks(bins: usize) -> (Vec<f64>, DMatrix<Complex64>) {
        let axis: Vec<f64> = (0..bins).map(|i| i as f64).collect();
        let half = bins / 2;
        let bump = |i: usize, c: f64| (-((i as f64 - c) / (half as f64 / 8.0)).powi(2)).exp();
        let mut m = DMatrix::<f64>::zeros(bins, 2);
        for i in 0..half {
            m[(i, 0)] = bump(i, half as f64 / 2.0);
            m[(i + half, 1)] = bump(i, half as f64 / 2.0);
        }
        for mut col in m.column_iter_mut() {
            let norm = col.norm();
            col /= norm;
        }
        (axis, m.map(|x| Complex64::new(x, 0.0)))
    }

    #[test]
    fn single_mode_shots_are_rank_one() {
        let (axis, modes) = hermite_gauss(64, 1, 8.0);
        let ens = simulate_shot_spectra(&modes, &[100.0], &axis, 50, 1).unwrap();
        let profile: Vec<f64> = modes.column(0).iter().map(|z| z.norm_sqr()).collect();
        for row in ens.intensities.row_iter() {
            let scale = row.sum();
            for (x, p) in row.iter().zip(&profile) {
                assert!((x - scale * p).abs() < 1e-9 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn mean_spectrum_converges() {
        let (axis, modes) = hermite_gauss(48, 3, 6.0);
        let pops = [50.0, 20.0, 5.0];
        let ens = simulate_shot_spectra(&modes, &pops, &axis, 100_000, 3).unwrap();
        let mean = ens.mean_spectrum();
        let peak = mean.iter().copied().fold(0.0, f64::max);
        for (j, m) in mean.iter().enumerate() {
            let expected: f64 = (0..3).map(|n| pops[n] * modes[(j, n)].norm_sqr()).sum();
            assert!((m - expected).abs() < 0.02 * peak, "bin {j}: {m} vs {expected}");
        }
    }

    #[test]
    fn single_mode_energy_is_exponential() {
        let (axis, modes) = hermite_gauss(16, 1, 3.0);
        let ens = simulate_shot_spectra(&modes, &[7.0], &axis, 50_000, 8).unwrap();
        let energies: Vec<f64> = ens.intensities.row_iter().map(|r| r.sum()).collect();
        let d = crate::photonstats::ks_statistic(&energies, |x| 1.0 - (-x / 7.0).exp());
        assert!(d < 0.01, "KS = {d}");
    }

    #[test]
    fn simulation_is_seeded() {
        let (axis, modes) = hermite_gauss(16, 2, 3.0);
        let a = simulate_shot_spectra(&modes, &[3.0, 1.0], &axis, 200, 5).unwrap();
        let b = simulate_shot_spectra(&modes, &[3.0, 1.0], &axis, 200, 5).unwrap();
        let c = simulate_shot_spectra(&modes, &[3.0, 1.0], &axis, 200, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.intensities, c.intensities);
    }

    #[test]
    fn simulation_preconditions() {
        let (axis, modes) = hermite_gauss(16, 2, 3.0);
        assert!(simulate_shot_spectra(&modes, &[1.0], &axis, 10, 0).is_err());
        assert!(simulate_shot_spectra(&modes, &[1.0, -1.0], &axis, 10, 0).is_err());
        assert!(matches!(simulate_shot_spectra(&modes, &[1.0, 1.0], &axis[..15], 10, 0), Err(Error::AxisMismatch(_))));
        let skewed = &modes * Complex64::new(2.0, 0.0);
        assert!(simulate_shot_spectra(&skewed, &[1.0, 1.0], &axis, 10, 0).is_err());
    }

    #[test]
    fn single_mode_estimate_gives_k_one() {
        let (axis, modes) = hermite_gauss(128, 1, 20.0);
        let ens = simulate_shot_spectra(&modes, &[1e4], &axis, 100_000, 11).unwrap();
        let g1 = g1_from_covariance(&ens).unwrap();
        assert!((g1.k - 1.0).abs() < 0.02, "K = {}", g1.k);
        assert!(g1.warning.is_none());
        assert_eq!(g1.matrix, g1.matrix.transpose());
    }

    #[test]
    fn disjoint_equal_modes_give_k_two() {
        let (axis, modes) = disjoint_blocks(128);
        let ens = simulate_shot_spectra(&modes, &[500.0, 500.0], &axis, 100_000, 12).unwrap();
        let g1 = g1_from_covariance(&ens).unwrap();
        assert!((g1.k - 2.0).abs() < 0.05, "K = {}", g1.k);
    }

    #[test]
    fn near_single_mode_round_trip() {
        // Two-mode weights with inverse participation ratio 1.03.
        let p = (2.0 + (4.0f64 - 8.0 * (1.0 - 1.0 / 1.03)).sqrt()) / 4.0;
        let k_true = 1.0 / (p * p + (1.0 - p) * (1.0 - p));
        assert!((k_true - 1.03).abs() < 1e-12);
        let (axis, modes) = hermite_gauss(128, 2, 20.0);
        let total = 1e6;
        let ens = simulate_shot_spectra(&modes, &[p * total, (1.0 - p) * total], &axis, 100_000, 13).unwrap();
        let g1 = g1_from_covariance(&ens).unwrap();
        assert!((g1.k - k_true).abs() < 0.03, "K = {}", g1.k);
    }

    #[test]
    fn raw_eigenvalues_sorted_and_weights_normalized() {
        let (axis, modes) = hermite_gauss(48, 3, 6.0);
        let ens = simulate_shot_spectra(&modes, &[5.0, 3.0, 1.0], &axis, 500, 2).unwrap();
        let g1 = g1_from_covariance(&ens).unwrap();
        assert!(g1.raw_eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert!((g1.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(g1.weights.iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn few_shots_warn() {
        let (axis, modes) = hermite_gauss(64, 1, 8.0);
        let ens = simulate_shot_spectra(&modes, &[10.0], &axis, 100, 4).unwrap();
        assert!(g1_from_covariance(&ens).unwrap().warning.is_some());
    }

    #[test]
    fn identical_shots_are_degenerate() {
        let ens =
            SpectraEnsemble::new(DMatrix::from_fn(20, 8, |_, j| j as f64), (0..8).map(|j| j as f64).collect(), None)
                .unwrap();
        assert!(matches!(g1_from_covariance(&ens), Err(Error::DegenerateCovariance)));
        assert!(matches!(bootstrap_k(&ens, 4), Err(Error::DegenerateCovariance)));
    }

    #[test]
    fn bootstrap_spread_shrinks_with_shots() {
        let (axis, modes) = hermite_gauss(32, 2, 5.0);
        let pops = [900.0, 100.0];
        let small = simulate_shot_spectra(&modes, &pops, &axis, 60 * 400, 21).unwrap();
        let large = simulate_shot_spectra(&modes, &pops, &axis, 60 * 1600, 21).unwrap();
        let bs = bootstrap_k(&small, DEFAULT_BOOTSTRAP_SUBSETS).unwrap();
        let bl = bootstrap_k(&large, DEFAULT_BOOTSTRAP_SUBSETS).unwrap();
        assert_eq!(bs.subset_values.len(), 60);
        assert_eq!(bl.shots_per_subset, 1600);
        let ratio = bs.std / bl.std;
        // Four times the shots per subset halves the spread, up to sampling noise.
        assert!((1.5..2.7).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn bootstrap_preconditions() {
        let (axis, modes) = hermite_gauss(16, 1, 3.0);
        let ens = simulate_shot_spectra(&modes, &[3.0], &axis, 100, 1).unwrap();
        assert!(bootstrap_k(&ens, 1).is_err());
        assert!(bootstrap_k(&ens, 60).is_err());
        assert!(bootstrap_k(&ens, 10).unwrap().warning.is_some());
    }

    #[test]
    fn noise_keeps_intensities_non_negative() {
        let (axis, modes) = hermite_gauss(32, 1, 5.0);
        let ens = simulate_noisy_shot_spectra(&modes, &[1.0], &axis, 200, 1, 0.5).unwrap();
        assert!(ens.intensities.iter().all(|x| *x >= 0.0));
        assert!(simulate_noisy_shot_spectra(&modes, &[1.0], &axis, 10, 1, -1.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let (axis, modes) = hermite_gauss(8, 2, 2.0);
        let ens = simulate_shot_spectra(&modes, &[2.0, 1.0], &axis, 5, 9).unwrap();
        let mut buf = Vec::new();
        ens.write_csv(&mut buf).unwrap();
        let back = SpectraEnsemble::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.axis, ens.axis);
        assert_eq!(back.intensities, ens.intensities);
        assert!(SpectraEnsemble::read_csv("1,2\n3\n".as_bytes()).is_err());
        assert!(SpectraEnsemble::read_csv("1,2\n".as_bytes()).is_err());
        assert!(SpectraEnsemble::read_csv("1,x\n1,2\n".as_bytes()).is_err());
    }
}
