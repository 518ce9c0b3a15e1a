//! Modelling toolkit for multimode high-gain parametric down-conversion in
//! periodically poled KTP: dispersion and phase matching, chirped pumps, the
//! joint spectral amplitude, Schmidt analysis, entropy bookkeeping, photon
//! statistics, Gaussian-state squeezing and conditioning, and experiment-side
//! estimators.

pub mod analysis;
pub mod config;
pub mod dispersion;
pub mod entropy;
pub mod error;
pub mod gaussian;
pub mod jsa;
mod numeric;
pub mod photonstats;
pub mod pump;
pub mod schmidt;
pub mod sweep;

pub use error::{Error, ErrorKind, Result};
