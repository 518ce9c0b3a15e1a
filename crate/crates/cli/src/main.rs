//! `twinbeam`: phase matching, JSA export, Schmidt analysis, sweeps, photon
//! statistics, conditioning and covariance analysis from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

mod commands;
mod output;

use output::CliError;

#[derive(Debug, Parser)]
#[command(name = "twinbeam", version, about = "Multimode high-gain PDC toolkit")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// INI configuration file with [crystal], [pump], [grid] and [sweep] sections.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed; overrides [sweep] seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Main output file (stdout if omitted).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// JSON summary file.
    #[arg(long, global = true, value_name = "PATH")]
    pub json: Option<PathBuf>,
    /// Worker threads for parallel work (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Pump group-delay dispersion (fs²); overrides [pump] gdd_fs2.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gdd: Option<f64>,
    /// Transform-limited pump FWHM (fs); overrides [pump] tau_fwhm_fs.
    #[arg(long = "tau-fwhm", global = true)]
    pub tau_fwhm: Option<f64>,
    /// Any configuration key, as section.key=value. Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the quasi-phase-matching condition for the signal/idler pair.
    QpmSolve(QpmArgs),
    /// Export the joint spectral amplitude as a CSV matrix.
    Jsa(JsaArgs),
    /// Schmidt decomposition: eigenvalue table and mode profiles.
    Schmidt(SchmidtArgs),
    /// Schmidt numbers and entropies over a GDD range.
    GddSweep,
    /// Signal brightness over a pump-photon range.
    PowerSweep(PowerArgs),
    /// Monte-Carlo photon-number statistics and g2.
    G2Sim(G2Args),
    /// Idler state conditioned on detecting N signal photons.
    Condition(ConditionArgs),
    /// Covariance-based mode analysis of shot-resolved spectra.
    Analyze(AnalyzeArgs),
    /// Fit a brightness coefficient or a minimum-entropy offset to data.
    Fit(FitArgs),
}

#[derive(Debug, Args)]
pub struct QpmArgs {
    /// Crystal temperatures to solve at (K), comma separated. Defaults to the configured one.
    #[arg(long, value_delimiter = ',')]
    pub temperatures: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct JsaArgs {
    /// Exported component: abs, abs2, real, imag or phase.
    #[arg(long, default_value = "abs")]
    pub component: String,
}

#[derive(Debug, Args)]
pub struct SchmidtArgs {
    /// Parametric gain; defaults to [pump] gain.
    #[arg(long)]
    pub gain: Option<f64>,
    /// Number of mode profiles to write.
    #[arg(long, default_value_t = 2)]
    pub modes: usize,
    /// CSV file for the mode intensity profiles.
    #[arg(long, value_name = "PATH")]
    pub modes_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// Measured (N_P, N_S) CSV; the brightness coefficient is fitted to it.
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// Largest pump photon number included in the fit.
    #[arg(long, default_value_t = twinbeam::photonstats::DEFAULT_SATURATION_WINDOW)]
    pub window: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Statistics {
    Continuous,
    BoseEinstein,
}

#[derive(Debug, Args)]
pub struct G2Args {
    /// Mode weights, comma separated. Defaults to the configured Schmidt populations.
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<f64>,
    /// Mean photon number per shot.
    #[arg(long)]
    pub mean_photons: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub shots: usize,
    #[arg(long, value_enum, default_value_t = Statistics::Continuous)]
    pub statistics: Statistics,
    /// Histogram bins.
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    /// Batches for the g2 standard error.
    #[arg(long, default_value_t = twinbeam::photonstats::DEFAULT_BATCHES)]
    pub batches: usize,
}

#[derive(Debug, Args)]
pub struct ConditionArgs {
    /// Complex squeezing amplitudes μ_n = tanh(r_n)e^{iφ_n}, e.g. 0.5+0.2i.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with_all = ["r", "phi"])]
    pub mu: Vec<Complex64>,
    /// Squeezing parameters r_n.
    #[arg(long, value_delimiter = ',')]
    pub r: Vec<f64>,
    /// Phases φ_n (default 0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub phi: Vec<f64>,
    /// Detected signal photon number N.
    #[arg(long)]
    pub photons: u32,
    /// Per-mode Fock cutoff (default N).
    #[arg(long)]
    pub cutoff: Option<u32>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Shot-resolved spectra CSV (one shot per row, header = frequency axis).
    /// Without it, spectra are simulated from the configured JSA.
    #[arg(long, value_name = "PATH")]
    pub spectra: Option<PathBuf>,
    #[arg(long, default_value_t = 20_000)]
    pub shots: usize,
    /// Schmidt modes kept in the simulation.
    #[arg(long, default_value_t = 8)]
    pub keep_modes: usize,
    /// Additive detector noise per bin in the simulation.
    #[arg(long, default_value_t = 0.0)]
    pub noise_std: f64,
    /// Disjoint shot subsets for the bootstrap spread (0 disables it).
    #[arg(long, default_value_t = twinbeam::analysis::DEFAULT_BOOTSTRAP_SUBSETS)]
    pub subsets: usize,
    /// Writes the simulated spectra to this CSV.
    #[arg(long, value_name = "PATH")]
    pub save_spectra: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FitKind {
    /// a in N_S = sinh²(a√N_P), from N_P and N_S columns.
    Brightness,
    /// Constant offset on the modelled S_mod curve, from gdd_fs2 and S_mod columns.
    Entropy,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub kind: FitKind,
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Model S_mod curve (a gdd-sweep CSV). Computed from the configuration if omitted.
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = twinbeam::photonstats::DEFAULT_SATURATION_WINDOW)]
    pub window: f64,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let c = &cli.common;
    match cli.command {
        Command::QpmSolve(a) => commands::qpm_solve(c, &a),
        Command::Jsa(a) => commands::jsa(c, &a),
        Command::Schmidt(a) => commands::schmidt(c, &a),
        Command::GddSweep => commands::gdd_sweep(c),
        Command::PowerSweep(a) => commands::power_sweep(c, &a),
        Command::G2Sim(a) => commands::g2_sim(c, &a),
        Command::Condition(a) => commands::condition(c, &a),
        Command::Analyze(a) => commands::analyze(c, &a),
        Command::Fit(a) => commands::fit(c, &a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
