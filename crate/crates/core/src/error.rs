use thiserror::Error;

/// Broad failure classes, used by front ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Resource,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("wavelength {lambda_um} µm is outside the Sellmeier validity window [{min_um}, {max_um}] µm")]
    OutOfWindow { lambda_um: f64, min_um: f64, max_um: f64 },

    #[error("Sellmeier {term} term is singular at λ = {lambda_um} µm")]
    SellmeierPole { term: &'static str, lambda_um: f64 },

    #[error("Sellmeier expression gives n² = {n_squared} ≤ 0 at λ = {lambda_um} µm ({term} term dominates)")]
    NegativeIndexSquared { lambda_um: f64, n_squared: f64, term: &'static str },

    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "not phase-matchable: pump {pump_um} µm, signal band [{band_min_um:.4}, {band_max_um:.4}] µm \
         has no sign change of Δk (Δk ranges over [{dk_min:.6e}, {dk_max:.6e}] rad/µm)"
    )]
    NotPhaseMatchable { pump_um: f64, band_min_um: f64, band_max_um: f64, dk_min: f64, dk_max: f64 },

    #[error("joint spectral amplitude vanishes on the grid (no phase-matched support)")]
    ZeroNorm,

    #[error("width undefined: {0}")]
    Resolution(String),

    #[error("SVD did not converge for a {rows}x{cols} matrix")]
    SvdNoConvergence { rows: usize, cols: usize },

    #[error("empty Schmidt spectrum")]
    EmptySpectrum,

    #[error("zero-gain populations: all modes are empty, normalized weights are undefined")]
    ZeroGain,

    #[error("ensemble has zero mean photon number")]
    ZeroMean,

    #[error("super-thermal assumption violated: g2 = {0} ≤ 1")]
    SubThermal(f64),

    #[error("degenerate fit input: {0}")]
    DegenerateFit(String),

    #[error("degenerate covariance: spectra carry no shot-to-shot fluctuations")]
    DegenerateCovariance,

    #[error("axis mismatch: {0}")]
    AxisMismatch(String),

    #[error("axis is not uniformly spaced")]
    NonUniformAxis,

    #[error("refusing enumeration of {modes} modes with N = {photons} (limits: {max_modes} modes, N ≤ {max_photons})")]
    EnumerationTooLarge { modes: usize, photons: u32, max_modes: usize, max_photons: u32 },

    #[error("no idler occupation pattern with {photons} photons has non-zero probability")]
    ImpossibleCondition { photons: u32 },

    #[error("model and data have no overlapping GDD range")]
    EmptyOverlap,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter { .. } | Error::Config(_) | Error::Io(_) | Error::Csv(_) => ErrorKind::Config,
            Error::EnumerationTooLarge { .. } => ErrorKind::Resource,
            _ => ErrorKind::Numerical,
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
