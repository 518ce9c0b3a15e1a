//! Acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so every line reaches the console. The
//! process fails if any criterion fails, except those listed in
//! `KNOWN_UNATTAINABLE`, which are still printed as FAIL.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;

use twinbeam::analysis::{bootstrap_k, g1_from_covariance, simulate_shot_spectra, DEFAULT_BOOTSTRAP_SUBSETS};
use twinbeam::config::RunConfig;
use twinbeam::dispersion::{refractive_index, solve_qpm, CrystalConfig, SellmeierCoefficients};
use twinbeam::entropy;
use twinbeam::gaussian::{
    condition_idler, covariance_oracle_variance, difference_quadrature_variance, LoProjection, TmssState,
};
use twinbeam::jsa::{build_jsa, default_grid};
use twinbeam::photonstats::{
    g2_estimator, g2_standard_error, invert_gain, mean_photons, sample_shots, DEFAULT_BATCHES,
};
use twinbeam::pump::PumpConfig;
use twinbeam::schmidt::{high_gain_populations, k_high_gain, schmidt_eigenvalues, HighGainPopulation};
use twinbeam::sweep::{run_gdd_sweep, write_gdd_csv, Provenance};

/// Criteria reported as FAIL without failing the run.
const KNOWN_UNATTAINABLE: &[u32] = &[8];

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut hits = Vec::new();
    for t in (293..=473).step_by(10) {
        let crystal = CrystalConfig::default().with_temperature(t as f64);
        if let Ok(sol) = solve_qpm(1.026, &crystal) {
            if (1.32..=1.42).contains(&sol.signal_um) && (3.8..=4.3).contains(&sol.idler_um) {
                hits.push((t, sol.signal_um, sol.idler_um));
            }
        }
    }
    let elapsed = start.elapsed();
    let detail = match hits.first() {
        Some((t, s, i)) => format!(
            "{} of 19 temperatures in band, e.g. T = {t} K gives λs = {s:.4} µm, λi = {i:.4} µm ({:.3} s)",
            hits.len(),
            elapsed.as_secs_f64()
        ),
        None => "no temperature in [293, 473] K phase-matches inside the band".into(),
    };
    check(!hits.is_empty() && within(elapsed, 1.0), detail)
}

fn criterion_2() -> Outcome {
    // Term-by-term evaluation at f = 0, independent of the library routine.
    let l2 = 1.026f64 * 1.026;
    let oracle = (5.756 + 0.0983 / (l2 - 0.202 * 0.202) + 189.32 / (l2 - 12.52 * 12.52) - 0.0132 * l2).sqrt();
    let s = SellmeierCoefficients::default();
    let n = refractive_index(1.026, s.t_room, &s).unwrap();
    check(
        (n - 2.1502).abs() <= 5e-4 && (n - oracle).abs() < 1e-12,
        format!("n = {n:.6}, oracle {oracle:.6}, target 2.1502 ± 5e-4"),
    )
}

fn k_hg_default(points: usize, gain: f64) -> f64 {
    let crystal = CrystalConfig::default();
    let pump = PumpConfig::default();
    let grid = default_grid(&crystal, &pump, points, 4.0).unwrap();
    let lambda = schmidt_eigenvalues(&build_jsa(&crystal, &pump, &grid).unwrap()).unwrap();
    k_high_gain(&high_gain_populations(&lambda, gain).unwrap())
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let k512 = k_hg_default(512, 10.0);
    let k1024 = k_hg_default(1024, 10.0);
    let elapsed = start.elapsed();
    check(
        k512 <= 1.15 && (k512 - k1024).abs() < 1e-3 && within(elapsed, 10.0),
        format!(
            "K_HG = {k512:.5} on 512², {k1024:.5} on 1024² (Δ = {:.1e}); limit 1.15 ({:.2} s)",
            (k512 - k1024).abs(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let cfg = RunConfig::default();
    let rows = run_gdd_sweep(&cfg, 0).unwrap();
    let elapsed = start.elapsed();
    if rows.len() != 41 || rows.iter().any(|r| r.error.is_some()) {
        return check(false, "sweep rows missing or failed");
    }
    let zero = rows.iter().find(|r| r.gdd_fs2 == 0.0).unwrap();
    let min = rows.iter().map(|r| r.s_mod).fold(f64::INFINITY, f64::min);
    let rise = rows.iter().map(|r| r.s_mod - zero.s_mod).fold(f64::NEG_INFINITY, f64::max);
    check(
        zero.s_mod - min <= 1e-3 && rise >= 0.1 && within(elapsed, 120.0),
        format!(
            "S_mod(0) = {:.5}, sweep min {min:.5}, max rise {rise:.4} within ±60000 fs² ({} gain policy, {:.1} s)",
            zero.s_mod,
            match cfg.sweep.gain_policy {
                twinbeam::config::GainPolicy::FixedEnergy => "fixed-energy",
                twinbeam::config::GainPolicy::FixedGain => "fixed-gain",
            },
            elapsed.as_secs_f64()
        ),
    )
}

fn dirichlet(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let gamma = Gamma::new(1.0, 1.0).unwrap();
    let raw: Vec<f64> = (0..n).map(|_| rng.sample(gamma)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violations = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=10);
        let lambda = dirichlet(&mut rng, n);
        let mut prev = f64::INFINITY;
        for i in 1..=80 {
            let k = k_high_gain(&high_gain_populations(&lambda, i as f64 * 0.2).unwrap());
            if k > prev * (1.0 + 1e-12) {
                violations += 1;
            }
            prev = k;
        }
    }
    let k = k_high_gain(&high_gain_populations(&[0.7, 0.2, 0.1], 3.0).unwrap());
    check(
        violations == 0 && (k - 1.2380).abs() <= 1e-4,
        format!("{violations} monotonicity violations on 100 spectra; K_HG(0.7, 0.2, 0.1; G = 3) = {k:.6}"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_identity = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=10);
        let photons: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-2.0..6.0))).collect();
        let r = entropy::report(&HighGainPopulation::from_photons(photons).unwrap()).unwrap();
        worst_identity = worst_identity.max((r.s_total - r.s_occ - r.s_mod).abs());
    }
    let mut worst_partition = 0.0f64;
    for k in [1usize, 2, 4, 8] {
        let r = entropy::report(&HighGainPopulation::from_photons(vec![1e6; k]).unwrap()).unwrap();
        let kf = k as f64;
        worst_partition = worst_partition.max((r.s_occ - 1.0 / kf).abs()).max((r.s_mod - (1.0 - 1.0 / kf)).abs());
    }
    check(
        worst_identity <= 1e-12 && worst_partition < 1e-3,
        format!(
            "max |s_total − s_occ − s_mod| = {worst_identity:.1e}; max bright-limit deviation = {worst_partition:.1e}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let single = sample_shots(&[1.0], 1.296e8, 1_000_000, 7).unwrap();
    let g2 = g2_estimator(&single).unwrap();
    let ratio = single.mean() / single.std();
    let mut multimode_ok = true;
    let mut worst_z = 0.0f64;
    for k in [2usize, 3, 5, 8] {
        let w = vec![1.0 / k as f64; k];
        let ens = sample_shots(&w, 1e8, 200_000, 70 + k as u64).unwrap();
        let g = g2_estimator(&ens).unwrap();
        let se = g2_standard_error(&ens, DEFAULT_BATCHES).unwrap();
        let z = (g - (1.0 + 1.0 / k as f64)).abs() / se;
        worst_z = worst_z.max(z);
        multimode_ok &= z < 5.0;
    }
    let elapsed = start.elapsed();
    check(
        (g2 - 2.0).abs() <= 0.02 && (ratio - 1.0).abs() <= 0.01 && multimode_ok && within(elapsed, 30.0),
        format!(
            "single mode g2 = {g2:.4}, mean/std = {ratio:.4}; equal-weight K ∈ {{2, 3, 5, 8}} worst deviation {worst_z:.2} standard errors ({:.1} s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_8() -> Outcome {
    let g = invert_gain(1e11).unwrap();
    let mut worst = 0.0f64;
    for i in 0..=300 {
        let gain = i as f64 * 0.05;
        worst = worst.max((invert_gain(mean_photons(gain).unwrap()).unwrap() - gain).abs());
    }
    check(
        (g - 13.56).abs() <= 0.01 && worst <= 1e-10,
        format!(
            "invert_gain(1e11) = arcsinh(√1e11) = {g:.4} vs target 13.56 ± 0.01; round-trip error {worst:.1e}. \
             The target is inconsistent with G = arcsinh(√N) (10.03 at 1.296e8)"
        ),
    )
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = rng.random_range(1..=6);
        let r: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..2.5)).collect();
        let phi: Vec<f64> = (0..m).map(|_| rng.random_range(-3.2..3.2)).collect();
        let mut unit = |scale: f64| -> Vec<Complex64> {
            let v: Vec<Complex64> =
                (0..m).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.into_iter().map(|z| z * (scale / norm)).collect()
        };
        let c = unit(1.0);
        let d = unit(0.9);
        let theta_s = rng.random_range(-3.2..3.2);
        let theta_i = rng.random_range(-3.2..3.2);
        let state = TmssState::new(r, phi).unwrap();
        let proj = LoProjection::new(c, d, theta_s, theta_i).unwrap();
        let a = difference_quadrature_variance(&state, &proj).unwrap();
        let b = covariance_oracle_variance(&state, &proj).unwrap();
        worst = worst.max((a - b).abs());
    }
    let state = TmssState::new(vec![1.0], vec![0.7]).unwrap();
    let proj = LoProjection::new(vec![Complex64::new(1.0, 0.0)], vec![Complex64::new(1.0, 0.0)], 0.3, 0.4).unwrap();
    let matched = difference_quadrature_variance(&state, &proj).unwrap();
    let elapsed = start.elapsed();
    check(
        worst <= 1e-10 && (matched - (-2.0f64).exp()).abs() < 1e-12 && within(elapsed, 5.0),
        format!(
            "max closed-form vs covariance-oracle gap {worst:.1e}; matched r = 1 gives {matched:.6} (e^-2 = 0.135335)"
        ),
    )
}

/// Conditioned weights by scanning every tuple in `[0, N]^M`.
fn enumerate_all(mu: &[Complex64], photons: u32) -> Vec<(Vec<u32>, f64)> {
    let m = mu.len();
    let base = photons as usize + 1;
    let mut out = Vec::new();
    for idx in 0..base.pow(m as u32) {
        let mut k = vec![0u32; m];
        let mut rest = idx;
        for slot in k.iter_mut() {
            *slot = (rest % base) as u32;
            rest /= base;
        }
        if k.iter().sum::<u32>() == photons {
            let w: f64 = k.iter().zip(mu).map(|(k, z)| z.norm_sqr().powi(*k as i32)).product();
            out.push((k, w));
        }
    }
    let total: f64 = out.iter().map(|p| p.1).sum();
    out.into_iter().filter(|p| p.1 > 0.0).map(|(k, w)| (k, w / total)).collect()
}

fn criterion_10() -> Outcome {
    let purity = |r: Vec<f64>, n| condition_idler(&TmssState::real(r).unwrap(), n, n).unwrap().purity;
    let p1 = purity(vec![0.8], 5);
    let p2 = purity(vec![0.6, 0.6], 1);
    let p3 = purity(vec![0.6, 0.6], 2);
    let mut worst = 0.0f64;
    for (r, phi, n) in [
        (vec![0.9, 0.5, 0.2], vec![0.0, 1.0, -2.0], 4u32),
        (vec![1.2, 0.3], vec![0.5, 0.5], 6),
        (vec![0.4, 0.4, 0.7, 0.1], vec![0.0; 4], 3),
    ] {
        let state = TmssState::new(r, phi).unwrap();
        let closed = condition_idler(&state, n, n).unwrap();
        let brute = enumerate_all(&state.mu(), n);
        if brute.len() != closed.patterns.len() {
            worst = f64::INFINITY;
            continue;
        }
        for (k, w) in &brute {
            let i = closed.patterns.iter().position(|p| p == k).unwrap();
            worst = worst.max((closed.weights[i] - w).abs());
        }
    }
    check(
        (p1 - 1.0).abs() < 1e-15 && (p2 - 0.5).abs() < 1e-15 && (p3 - 1.0 / 3.0).abs() < 1e-15 && worst <= 1e-12,
        format!("purities {p1}, {p2}, {p3:.6}; max weight gap to brute-force enumeration {worst:.1e}"),
    )
}

fn hermite_gauss_pair(bins: usize) -> (Vec<f64>, DMatrix<Complex64>) {
    let axis: Vec<f64> = (0..bins).map(|i| (i as f64 - (bins as f64 - 1.0) / 2.0) / 20.0).collect();
    let mut m = DMatrix::<f64>::from_fn(bins, 2, |j, n| {
        let x = axis[j];
        (-x * x / 2.0).exp() * if n == 0 { 1.0 } else { 2.0 * x }
    });
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }
    (axis, m.map(|x| Complex64::new(x, 0.0)))
}

fn criterion_11() -> Outcome {
    let start = Instant::now();
    let p = (2.0 + (4.0f64 - 8.0 * (1.0 - 1.0 / 1.03)).sqrt()) / 4.0;
    let (axis, modes) = hermite_gauss_pair(128);
    let pops = [p * 1e6, (1.0 - p) * 1e6];
    let full = simulate_shot_spectra(&modes, &pops, &axis, 100_000, 11).unwrap();
    let k_est = g1_from_covariance(&full).unwrap().k;
    let boot = bootstrap_k(&full, DEFAULT_BOOTSTRAP_SUBSETS).unwrap();
    let quarter = simulate_shot_spectra(&modes, &pops, &axis, 25_000, 12).unwrap();
    let boot_small = bootstrap_k(&quarter, DEFAULT_BOOTSTRAP_SUBSETS).unwrap();
    let elapsed = start.elapsed();
    check(
        (k_est - 1.03).abs() <= 0.03 && boot.std < boot_small.std && within(elapsed, 60.0),
        format!(
            "K_est = {k_est:.4} (true 1.03); bootstrap over 60 subsets: {:.4} ± {:.4} at 1e5 shots, ± {:.4} at 2.5e4 shots ({:.1} s)",
            boot.mean,
            boot.std,
            boot_small.std,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_12() -> Outcome {
    let mut cfg = RunConfig::default();
    cfg.grid.points = 256;
    cfg.sweep.points = 9;
    let render = |workers| {
        let rows = run_gdd_sweep(&cfg, workers).unwrap();
        let mut buf = Vec::new();
        write_gdd_csv(&rows, &Provenance::new("gdd-sweep", &cfg, cfg.sweep.seed), &mut buf).unwrap();
        buf
    };
    let runs = [render(1), render(4), render(4), render(1)];
    let identical = runs.windows(2).all(|w| w[0] == w[1]);
    check(identical, format!("4 runs at 1 and 4 workers, {} bytes each, identical: {identical}", runs[0].len()))
}

fn main() {
    let criteria: [Criterion; 12] = [
        (1, "phase matching", criterion_1),
        (2, "Sellmeier spot check", criterion_2),
        (3, "near-single-mode at zero GDD", criterion_3),
        (4, "GDD transition", criterion_4),
        (5, "gain narrowing", criterion_5),
        (6, "entropy identities", criterion_6),
        (7, "photon statistics", criterion_7),
        (8, "gain arithmetic", criterion_8),
        (9, "homodyne oracle", criterion_9),
        (10, "conditioning", criterion_10),
        (11, "covariance round trip", criterion_11),
        (12, "determinism", criterion_12),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let outcome = run();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{verdict}] {name}: {}", outcome.detail);
        if !outcome.pass && !KNOWN_UNATTAINABLE.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected acceptance failures: {unexpected:?}");
        std::process::exit(1);
    }
}
