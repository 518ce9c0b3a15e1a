use std::fs::File;
use std::io::{BufReader, Write};

use serde::Serialize;
use serde_json::json;
use twinbeam::analysis::{bootstrap_k, g1_from_covariance, simulate_noisy_shot_spectra, SpectraEnsemble};
use twinbeam::config::RunConfig;
use twinbeam::dispersion::solve_qpm;
use twinbeam::gaussian::{condition_idler, TmssState};
use twinbeam::jsa::{build_jsa, conditional_width, default_grid, marginal_width, Axis, Component, JsaMatrix};
use twinbeam::photonstats::{
    brightness, fit_brightness_curve, g2_theory, mean_photons, sample_shots_with, summarize, Histogram, ModeStatistics,
};
use twinbeam::schmidt::{decompose, high_gain_populations, k_high_gain, schmidt_number, truncate};
use twinbeam::sweep::{
    fit_min_entropy_offset, run_gdd_sweep, run_power_sweep, write_gdd_csv, write_power_csv, Provenance,
};

use crate::output::{json_if_requested, load_config, num, read_columns, sink, write_table, CliError, Result};
use crate::{
    AnalyzeArgs, Common, ConditionArgs, FitArgs, FitKind, G2Args, JsaArgs, PowerArgs, QpmArgs, SchmidtArgs, Statistics,
};

/// Largest simulated spectra ensemble, in stored values.
const MAX_SPECTRA_VALUES: usize = 200_000_000;
/// Largest Monte-Carlo run, in sampled mode amplitudes.
const MAX_SHOT_SAMPLES: usize = 2_000_000_000;

fn provenance(command: &str, cfg: &RunConfig) -> Provenance {
    Provenance::new(command, cfg, cfg.sweep.seed)
}

fn build(cfg: &RunConfig) -> Result<JsaMatrix> {
    let grid = default_grid(&cfg.crystal, &cfg.pump, cfg.grid.points, cfg.grid.span_lobes)?;
    Ok(build_jsa(&cfg.crystal, &cfg.pump, &grid)?)
}

#[derive(Serialize)]
struct QpmRow {
    temperature_k: f64,
    pump_um: f64,
    signal_um: f64,
    idler_um: f64,
    delta_k: f64,
    error: Option<String>,
}

pub fn qpm_solve(common: &Common, args: &QpmArgs) -> Result<()> {
    let cfg = load_config(common, None)?;
    let pump_um = cfg.pump.center_wavelength_um;
    let rows: Vec<QpmRow> = if args.temperatures.is_empty() {
        let sol = solve_qpm(pump_um, &cfg.crystal)?;
        vec![QpmRow {
            temperature_k: cfg.crystal.temperature_k,
            pump_um,
            signal_um: sol.signal_um,
            idler_um: sol.idler_um,
            delta_k: sol.delta_k,
            error: None,
        }]
    } else {
        args.temperatures
            .iter()
            .map(|&t| match solve_qpm(pump_um, &cfg.crystal.with_temperature(t)) {
                Ok(sol) => QpmRow {
                    temperature_k: t,
                    pump_um,
                    signal_um: sol.signal_um,
                    idler_um: sol.idler_um,
                    delta_k: sol.delta_k,
                    error: None,
                },
                Err(e) => QpmRow {
                    temperature_k: t,
                    pump_um,
                    signal_um: f64::NAN,
                    idler_um: f64::NAN,
                    delta_k: f64::NAN,
                    error: Some(e.to_string()),
                },
            })
            .collect()
    };
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                num(r.temperature_k),
                num(r.pump_um),
                num(r.signal_um),
                num(r.idler_um),
                num(r.delta_k),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_table(
        sink(common.out.as_deref())?,
        &provenance("qpm-solve", &cfg),
        &["temperature_k", "pump_um", "signal_um", "idler_um", "delta_k", "error"],
        &table,
    )?;
    json_if_requested(common, &rows)
}

pub fn jsa(common: &Common, args: &JsaArgs) -> Result<()> {
    let cfg = load_config(common, None)?;
    let component: Component = args.component.parse()?;
    let jsa = build(&cfg)?;
    let mut out = sink(common.out.as_deref())?;
    provenance("jsa", &cfg).with("component", &args.component).write(&mut out)?;
    jsa.write_csv(out, component)?;
    let width = |f: fn(&JsaMatrix, Axis) -> twinbeam::Result<f64>, axis| f(&jsa, axis).ok();
    let ms = width(marginal_width, Axis::Signal);
    let cs = width(conditional_width, Axis::Signal);
    json_if_requested(
        common,
        &json!({
            "points": cfg.grid.points,
            "marginal_fwhm_signal": ms,
            "marginal_fwhm_idler": width(marginal_width, Axis::Idler),
            "conditional_fwhm_signal": cs,
            "conditional_fwhm_idler": width(conditional_width, Axis::Idler),
            "fedorov_ratio": ms.zip(cs).map(|(m, c)| m / c),
        }),
    )
}

pub fn schmidt(common: &Common, args: &SchmidtArgs) -> Result<()> {
    let cfg = load_config(common, None)?;
    let gain = args.gain.unwrap_or(cfg.gain);
    let spectrum = decompose(&build(&cfg)?)?;
    let lambda = truncate(&spectrum.eigenvalues);
    let pop = high_gain_populations(&lambda, gain)?;
    let k_lg = schmidt_number(&lambda)?;
    let k_hg = k_high_gain(&pop);
    let table: Vec<Vec<String>> = (0..lambda.len())
        .map(|n| vec![(n + 1).to_string(), num(lambda[n]), num(pop.weights[n]), num(pop.photons[n])])
        .collect();
    let prov = provenance("schmidt", &cfg).with("gain", gain).with("K_LG", k_lg).with("K_HG", k_hg);
    write_table(sink(common.out.as_deref())?, &prov, &["n", "lambda", "pi", "photons"], &table)?;

    if let Some(path) = &args.modes_out {
        let count = args.modes.min(lambda.len());
        let mut header = vec!["omega_s".to_string()];
        header.extend((1..=count).map(|n| format!("signal_mode_{n}")));
        header.push("omega_i".into());
        header.extend((1..=count).map(|n| format!("idler_mode_{n}")));
        let rows: Vec<Vec<String>> = (0..spectrum.signal_axis.len())
            .map(|j| {
                let mut row = vec![num(spectrum.signal_axis[j])];
                row.extend((0..count).map(|n| num(spectrum.signal_modes[(j, n)].norm_sqr())));
                row.push(num(spectrum.idler_axis[j]));
                row.extend((0..count).map(|n| num(spectrum.idler_modes[(j, n)].norm_sqr())));
                row
            })
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_table(sink(Some(path))?, &prov, &header, &rows)?;
    }
    json_if_requested(
        common,
        &json!({
            "gain": gain,
            "K_LG": k_lg,
            "K_HG": k_hg,
            "eigenvalues": lambda,
            "weights": pop.weights,
            "photons": pop.photons,
        }),
    )
}

pub fn gdd_sweep(common: &Common) -> Result<()> {
    let cfg = load_config(common, Some("gdd"))?;
    let rows = run_gdd_sweep(&cfg, common.workers)?;
    write_gdd_csv(&rows, &provenance("gdd-sweep", &cfg), sink(common.out.as_deref())?)?;
    json_if_requested(common, &rows)?;
    if let Some(err) = rows.iter().map(|r| r.error.as_deref()).collect::<Option<Vec<_>>>() {
        return Err(CliError::Numerical(format!("every sweep point failed; first: {}", err[0])));
    }
    Ok(())
}

pub fn power_sweep(common: &Common, args: &PowerArgs) -> Result<()> {
    let mut cfg = load_config(common, Some("pump_power"))?;
    let mut prov = provenance("power-sweep", &cfg);
    let fit = match &args.data {
        Some(path) => {
            let cols = read_columns(path, &["N_P", "N_S"])?;
            let points: Vec<(f64, f64)> = cols[0].iter().copied().zip(cols[1].iter().copied()).collect();
            let fit = fit_brightness_curve(&points, args.window)?;
            cfg.sweep.brightness_coefficient = fit.coefficient;
            prov = prov
                .with("data", path.display())
                .with("fitted_coefficient", fit.coefficient)
                .with("fit_points", fit.points_used)
                .with("fit_log_residual_rms", fit.log_residual_rms);
            Some(fit)
        }
        None => None,
    };
    let rows = run_power_sweep(&cfg)?;
    write_power_csv(&rows, &prov, sink(common.out.as_deref())?)?;
    json_if_requested(common, &json!({ "fit": fit, "rows": rows }))
}

pub fn g2_sim(common: &Common, args: &G2Args) -> Result<()> {
    let cfg = load_config(common, None)?;
    let (weights, default_mean) = if args.weights.is_empty() {
        let lambda = truncate(&decompose(&build(&cfg)?)?.eigenvalues);
        let pop = high_gain_populations(&lambda, cfg.gain)?;
        let total: f64 = pop.photons.iter().sum();
        (pop.weights, total)
    } else {
        let total: f64 = args.weights.iter().sum();
        (args.weights.iter().map(|w| w / total).collect(), mean_photons(cfg.gain)?)
    };
    if args.shots.saturating_mul(weights.len()) > MAX_SHOT_SAMPLES {
        return Err(CliError::Resource(format!(
            "{} shots × {} modes exceeds {MAX_SHOT_SAMPLES} samples",
            args.shots,
            weights.len()
        )));
    }
    let total_mean = args.mean_photons.unwrap_or(default_mean);
    let statistics = match args.statistics {
        Statistics::Continuous => ModeStatistics::Continuous,
        Statistics::BoseEinstein => ModeStatistics::BoseEinstein,
    };
    let seed = cfg.sweep.seed;
    let ens = sample_shots_with(&weights, total_mean, args.shots, seed, statistics)?;
    let summary = summarize(&ens, args.batches)?;
    let theory = g2_theory(&weights)?;
    let hist = Histogram::new(&ens.photons, args.bins)?;
    let mut out = sink(common.out.as_deref())?;
    provenance("g2-sim", &cfg)
        .with("shots", args.shots)
        .with("modes", weights.len())
        .with("mean_photons", total_mean)
        .with("g2", summary.g2)
        .with("g2_theory", theory)
        .with("stderr", summary.stderr)
        .write(&mut out)?;
    hist.write_csv(out)?;
    json_if_requested(
        common,
        &json!({
            "mean": summary.mean,
            "std": summary.std,
            "g2": summary.g2,
            "K_g2": summary.k_g2,
            "stderr": summary.stderr,
            "g2_theory": theory,
            "shots": args.shots,
            "seed": seed,
        }),
    )
}

pub fn condition(common: &Common, args: &ConditionArgs) -> Result<()> {
    let state = if !args.mu.is_empty() {
        TmssState::from_mu(&args.mu)?
    } else if !args.r.is_empty() {
        let phi = if args.phi.is_empty() { vec![0.0; args.r.len()] } else { args.phi.clone() };
        TmssState::new(args.r.clone(), phi)?
    } else {
        return Err(CliError::Usage("condition needs --mu or --r".into()));
    };
    let cond = condition_idler(&state, args.photons, args.cutoff.unwrap_or(args.photons))?;
    let mu: Vec<[f64; 2]> = state.mu().iter().map(|z| [z.re, z.im]).collect();
    let value = json!({
        "photons": cond.photons,
        "mu": mu,
        "patterns": cond.patterns,
        "weights": cond.weights,
        "purity": cond.purity,
    });
    let mut out = sink(common.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &value)?;
    writeln_flush(&mut out)?;
    json_if_requested(common, &value)
}

fn writeln_flush(out: &mut Box<dyn std::io::Write>) -> Result<()> {
    writeln!(out).and_then(|_| out.flush()).map_err(|source| CliError::Io { path: "output".into(), source })
}

pub fn analyze(common: &Common, args: &AnalyzeArgs) -> Result<()> {
    let cfg = load_config(common, None)?;
    let mut prov = provenance("analyze", &cfg);
    let mut k_model = None;
    let ens = match &args.spectra {
        Some(path) => {
            let file = File::open(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
            prov = prov.with("spectra", path.display());
            SpectraEnsemble::read_csv(BufReader::new(file))?
        }
        None => {
            if args.shots.saturating_mul(cfg.grid.points) > MAX_SPECTRA_VALUES {
                return Err(CliError::Resource(format!(
                    "{} shots × {} bins exceeds {MAX_SPECTRA_VALUES} stored values",
                    args.shots, cfg.grid.points
                )));
            }
            let jsa = build(&cfg)?;
            let spectrum = decompose(&jsa)?;
            let lambda = truncate(&spectrum.eigenvalues);
            let pop = high_gain_populations(&lambda, cfg.gain)?;
            k_model = Some(k_high_gain(&pop));
            let keep = args.keep_modes.clamp(1, lambda.len());
            let modes = spectrum.signal_modes.columns(0, keep).into_owned();
            let ens = simulate_noisy_shot_spectra(
                &modes,
                &pop.photons[..keep],
                jsa.grid.signal(),
                args.shots,
                cfg.sweep.seed,
                args.noise_std,
            )?;
            if let Some(path) = &args.save_spectra {
                ens.write_csv(sink(Some(path))?)?;
            }
            prov = prov.with("shots", args.shots).with("kept_modes", keep).with("noise_std", args.noise_std);
            ens
        }
    };
    let est = g1_from_covariance(&ens)?;
    let boot = if args.subsets > 0 { Some(bootstrap_k(&ens, args.subsets)?) } else { None };
    prov = prov.with("K", est.k);
    if let Some(k) = k_model {
        prov = prov.with("K_HG_model", k);
    }
    if let Some(b) = &boot {
        prov = prov.with("K_mean", b.mean).with("K_std", b.std);
    }
    if let Some(w) = &est.warning {
        eprintln!("warning: {w}");
        prov = prov.with("warning", w);
    }
    let rows: Vec<Vec<String>> = est
        .raw_eigenvalues
        .iter()
        .enumerate()
        .map(|(n, &raw)| vec![(n + 1).to_string(), num(raw), num(est.weights.get(n).copied().unwrap_or(0.0))])
        .collect();
    write_table(sink(common.out.as_deref())?, &prov, &["n", "raw_eigenvalue", "weight"], &rows)?;
    json_if_requested(
        common,
        &json!({
            "shots": ens.shots(),
            "bins": ens.bins(),
            "estimate": est,
            "bootstrap": boot,
            "K_HG_model": k_model,
        }),
    )
}

pub fn fit(common: &Common, args: &FitArgs) -> Result<()> {
    match args.kind {
        FitKind::Brightness => {
            let cfg = load_config(common, None)?;
            let cols = read_columns(&args.data, &["N_P", "N_S"])?;
            let points: Vec<(f64, f64)> = cols[0].iter().copied().zip(cols[1].iter().copied()).collect();
            let fit = fit_brightness_curve(&points, args.window)?;
            let prov = provenance("fit", &cfg)
                .with("kind", "brightness")
                .with("data", args.data.display())
                .with("coefficient", fit.coefficient)
                .with("points_used", fit.points_used)
                .with("log_residual_rms", fit.log_residual_rms);
            let rows: Vec<Vec<String>> =
                points.iter().map(|&(np, ns)| vec![num(np), num(ns), num(brightness(fit.coefficient, np))]).collect();
            write_table(sink(common.out.as_deref())?, &prov, &["N_P", "N_S", "N_S_fit"], &rows)?;
            json_if_requested(common, &fit)
        }
        FitKind::Entropy => {
            let cfg = load_config(common, Some("gdd"))?;
            let model: Vec<(f64, f64)> = match &args.model {
                Some(path) => {
                    let cols = read_columns(path, &["gdd_fs2", "S_mod"])?;
                    cols[0].iter().copied().zip(cols[1].iter().copied()).collect()
                }
                None => run_gdd_sweep(&cfg, common.workers)?.iter().map(|r| (r.gdd_fs2, r.s_mod)).collect(),
            };
            let cols = read_columns(&args.data, &["gdd_fs2", "S_mod"])?;
            let data: Vec<(f64, f64)> = cols[0].iter().copied().zip(cols[1].iter().copied()).collect();
            let offset = fit_min_entropy_offset(&model, &data)?;
            let prov = provenance("fit", &cfg)
                .with("kind", "entropy")
                .with("data", args.data.display())
                .with("offset", offset);
            let rows: Vec<Vec<String>> = model.iter().map(|&(g, s)| vec![num(g), num(s), num(s + offset)]).collect();
            write_table(sink(common.out.as_deref())?, &prov, &["gdd_fs2", "S_mod_model", "S_mod_fit"], &rows)?;
            json_if_requested(common, &json!({ "offset": offset, "data_points": data.len() }))
        }
    }
}
