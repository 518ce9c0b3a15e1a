//! Run configuration: INI ingestion with `[crystal]`, `[pump]`, `[grid]` and
//! `[sweep]` sections, key-level overrides, a canonical text form whose
//! SHA-256 identifies the run, and per-point seed derivation.
//!
//! Every key has a compiled-in default, so an empty file is a valid
//! configuration. Unknown sections and keys are rejected.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dispersion::CrystalConfig;
use crate::error::{Error, Result};
use crate::jsa::{DEFAULT_GRID_POINTS, DEFAULT_SPAN_LOBES, MIN_GRID_POINTS};
use crate::pump::PumpConfig;

/// Reference parametric gain at zero GDD.
pub const DEFAULT_GAIN: f64 = 10.0;
/// Brightness coefficient `a` in `G = a√N_P`.
pub const DEFAULT_BRIGHTNESS_COEFFICIENT: f64 = 3.8e-6;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridConfig {
    pub points: usize,
    /// Half-width of the grid in phase-matching side lobes.
    pub span_lobes: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { points: DEFAULT_GRID_POINTS, span_lobes: DEFAULT_SPAN_LOBES }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Gdd,
    PumpPower,
}

/// How the gain follows the pump while sweeping GDD.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GainPolicy {
    /// Pulse energy is held fixed, so the peak-field gain falls as the pulse
    /// stretches: `G(GDD) = G₀·√(τ₀/τ(GDD))`.
    FixedEnergy,
    /// `G` is held at its reference value at every point.
    FixedGain,
}

impl GainPolicy {
    pub fn gain(self, reference_gain: f64, tau0: f64, tau: f64) -> f64 {
        match self {
            GainPolicy::FixedEnergy => reference_gain * (tau0 / tau).sqrt(),
            GainPolicy::FixedGain => reference_gain,
        }
    }

    fn name(self) -> &'static str {
        match self {
            GainPolicy::FixedEnergy => "fixed_energy",
            GainPolicy::FixedGain => "fixed_gain",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    /// GDD in fs² or pump photons per pulse, depending on `variable`.
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub gain_policy: GainPolicy,
    pub brightness_coefficient: f64,
    pub seed: u64,
}

impl SweepConfig {
    fn defaults_for(variable: SweepVariable) -> (f64, f64, usize) {
        match variable {
            SweepVariable::Gdd => (-60_000.0, 60_000.0, 41),
            SweepVariable::PumpPower => (0.0, 1.6e13, 33),
        }
    }

    /// Evenly spaced sweep values, endpoints included.
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|i| if i + 1 == self.points { self.stop } else { self.start + step * i as f64 }).collect()
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        let (start, stop, points) = Self::defaults_for(SweepVariable::Gdd);
        Self {
            variable: SweepVariable::Gdd,
            start,
            stop,
            points,
            gain_policy: GainPolicy::FixedEnergy,
            brightness_coefficient: DEFAULT_BRIGHTNESS_COEFFICIENT,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub crystal: CrystalConfig,
    pub pump: PumpConfig,
    pub grid: GridConfig,
    /// Reference gain `G₀` at zero GDD.
    pub gain: f64,
    pub sweep: SweepConfig,
    /// Which of start, stop and points were given explicitly.
    #[serde(skip)]
    range_set: [bool; 3],
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            crystal: CrystalConfig::default(),
            pump: PumpConfig::default(),
            grid: GridConfig::default(),
            gain: DEFAULT_GAIN,
            sweep: SweepConfig::default(),
            range_set: [false; 3],
        }
    }
}

fn parse_f64(section: &str, key: &str, value: &str) -> Result<f64> {
    let v: f64 =
        value.trim().parse().map_err(|_| Error::Config(format!("[{section}] {key} = `{value}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("[{section}] {key} must be finite")));
    }
    Ok(v)
}

fn parse_usize(section: &str, key: &str, value: &str) -> Result<usize> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("[{section}] {key} = `{value}` is not a non-negative integer")))
}

impl RunConfig {
    /// Parses INI text on top of the defaults.
    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = ini::Ini::load_from_str(text).map_err(|e| Error::Config(format!("INI syntax: {e}")))?;
        let mut cfg = Self::default();
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if props.iter().next().is_some() {
                    return Err(Error::Config("keys must appear inside a section".into()));
                }
                continue;
            };
            for (key, value) in props.iter() {
                cfg.set(section, key, value)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_ini_str(&text)
    }

    /// Sets one `[section] key` from its text value. Validation of
    /// cross-field constraints is left to [`RunConfig::validate`].
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let f = || parse_f64(section, key, value);
        let unknown = || Error::Config(format!("unknown key `{key}` in [{section}]"));
        match section {
            "crystal" => {
                let s = &mut self.crystal.sellmeier;
                match key {
                    "poling_period_um" => self.crystal.poling_period_um = f()?,
                    "length_mm" => self.crystal.length_mm = f()?,
                    "temperature_k" => self.crystal.temperature_k = f()?,
                    "t_room_k" => s.t_room = f()?,
                    _ => {
                        if let Some(i) = key.strip_prefix("sellmeier_a").and_then(|i| i.parse::<usize>().ok()) {
                            *s.a.get_mut(i.wrapping_sub(1)).ok_or_else(unknown)? = f()?;
                        } else if let Some(i) = key.strip_prefix("sellmeier_b").and_then(|i| i.parse::<usize>().ok()) {
                            *s.b.get_mut(i.wrapping_sub(1)).ok_or_else(unknown)? = f()?;
                        } else {
                            return Err(unknown());
                        }
                    }
                }
            }
            "pump" => match key {
                "wavelength_um" => self.pump.center_wavelength_um = f()?,
                "tau_fwhm_fs" => self.pump.tau_fwhm_fs = f()?,
                "gdd_fs2" => self.pump.gdd_fs2 = f()?,
                "energy_j" => self.pump.pulse_energy_j = Some(f()?),
                "gain" => self.gain = f()?,
                _ => return Err(unknown()),
            },
            "grid" => match key {
                "points" => self.grid.points = parse_usize(section, key, value)?,
                "span_lobes" => self.grid.span_lobes = f()?,
                _ => return Err(unknown()),
            },
            "sweep" => match key {
                "variable" => {
                    self.sweep.variable = match value.trim() {
                        "gdd" => SweepVariable::Gdd,
                        "pump_power" => SweepVariable::PumpPower,
                        other => {
                            return Err(Error::Config(format!(
                                "[sweep] variable `{other}`: expected gdd or pump_power"
                            )))
                        }
                    };
                    let (start, stop, points) = SweepConfig::defaults_for(self.sweep.variable);
                    if !self.range_set[0] {
                        self.sweep.start = start;
                    }
                    if !self.range_set[1] {
                        self.sweep.stop = stop;
                    }
                    if !self.range_set[2] {
                        self.sweep.points = points;
                    }
                }
                "start" => {
                    self.sweep.start = f()?;
                    self.range_set[0] = true;
                }
                "stop" => {
                    self.sweep.stop = f()?;
                    self.range_set[1] = true;
                }
                "points" => {
                    self.sweep.points = parse_usize(section, key, value)?;
                    self.range_set[2] = true;
                }
                "gain_policy" => {
                    self.sweep.gain_policy = match value.trim() {
                        "fixed_energy" => GainPolicy::FixedEnergy,
                        "fixed_gain" => GainPolicy::FixedGain,
                        other => {
                            return Err(Error::Config(format!(
                                "[sweep] gain_policy `{other}`: expected fixed_energy or fixed_gain"
                            )))
                        }
                    }
                }
                "brightness_coefficient" => self.sweep.brightness_coefficient = f()?,
                "seed" => {
                    self.sweep.seed = value
                        .trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("[sweep] seed = `{value}` is not a u64")))?
                }
                _ => return Err(unknown()),
            },
            other => return Err(Error::Config(format!("unknown section [{other}]"))),
        }
        Ok(())
    }

    /// Applies a `section.key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (path, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not section.key=value")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not section.key=value")))?;
        self.set(section, key, value)
    }

    pub fn validate(&self) -> Result<()> {
        let as_config = |e: Error| Error::Config(e.to_string());
        self.crystal.validate().map_err(as_config)?;
        self.pump.validate().map_err(as_config)?;
        if self.grid.points < MIN_GRID_POINTS {
            return Err(Error::Config(format!("[grid] points must be ≥ {MIN_GRID_POINTS}, got {}", self.grid.points)));
        }
        if !(self.grid.span_lobes > 0.0) {
            return Err(Error::Config("[grid] span_lobes must be > 0".into()));
        }
        if !(self.gain > 0.0) {
            return Err(Error::Config(format!("[pump] gain must be > 0, got {}", self.gain)));
        }
        let s = &self.sweep;
        if s.points == 0 {
            return Err(Error::Config("[sweep] points must be ≥ 1".into()));
        }
        if !(s.start <= s.stop) {
            return Err(Error::Config(format!("[sweep] start {} must not exceed stop {}", s.start, s.stop)));
        }
        if s.variable == SweepVariable::PumpPower && s.start < 0.0 {
            return Err(Error::Config("[sweep] pump photon numbers must be ≥ 0".into()));
        }
        if !(s.brightness_coefficient > 0.0) {
            return Err(Error::Config("[sweep] brightness_coefficient must be > 0".into()));
        }
        Ok(())
    }

    /// Every resolved key in a fixed order, as INI text. Parsing it back
    /// reproduces the configuration.
    pub fn canonical_ini(&self) -> String {
        let mut out = String::new();
        let c = &self.crystal;
        let _ = writeln!(out, "[crystal]");
        let _ = writeln!(out, "poling_period_um = {}", c.poling_period_um);
        let _ = writeln!(out, "length_mm = {}", c.length_mm);
        let _ = writeln!(out, "temperature_k = {}", c.temperature_k);
        let _ = writeln!(out, "t_room_k = {}", c.sellmeier.t_room);
        for (i, a) in c.sellmeier.a.iter().enumerate() {
            let _ = writeln!(out, "sellmeier_a{} = {a}", i + 1);
        }
        for (i, b) in c.sellmeier.b.iter().enumerate() {
            let _ = writeln!(out, "sellmeier_b{} = {b}", i + 1);
        }
        let p = &self.pump;
        let _ = writeln!(out, "\n[pump]");
        let _ = writeln!(out, "wavelength_um = {}", p.center_wavelength_um);
        let _ = writeln!(out, "tau_fwhm_fs = {}", p.tau_fwhm_fs);
        let _ = writeln!(out, "gdd_fs2 = {}", p.gdd_fs2);
        if let Some(e) = p.pulse_energy_j {
            let _ = writeln!(out, "energy_j = {e}");
        }
        let _ = writeln!(out, "gain = {}", self.gain);
        let _ = writeln!(out, "\n[grid]");
        let _ = writeln!(out, "points = {}", self.grid.points);
        let _ = writeln!(out, "span_lobes = {}", self.grid.span_lobes);
        let s = &self.sweep;
        let _ = writeln!(out, "\n[sweep]");
        let variable = match s.variable {
            SweepVariable::Gdd => "gdd",
            SweepVariable::PumpPower => "pump_power",
        };
        let _ = writeln!(out, "variable = {variable}");
        let _ = writeln!(out, "start = {}", s.start);
        let _ = writeln!(out, "stop = {}", s.stop);
        let _ = writeln!(out, "points = {}", s.points);
        let _ = writeln!(out, "gain_policy = {}", s.gain_policy.name());
        let _ = writeln!(out, "brightness_coefficient = {}", s.brightness_coefficient);
        let _ = writeln!(out, "seed = {}", s.seed);
        out
    }

    /// Hex SHA-256 of [`RunConfig::canonical_ini`].
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical_ini().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Seed for sweep point `index`: the first eight bytes of
/// `SHA-256(master ‖ index)`, little-endian.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("SHA-256 digest has 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_ini_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.crystal.poling_period_um, 27.91);
        assert_eq!(cfg.crystal.length_mm, 2.0);
        assert_eq!(cfg.pump.tau_fwhm_fs, 260.0);
        assert_eq!(cfg.gain, 10.0);
        assert_eq!(cfg.sweep.points, 41);
    }

    #[test]
    fn sections_parse() {
        let cfg = RunConfig::from_ini_str(
            "[crystal]\ntemperature_k = 323\nsellmeier_a1 = 5.8\n\n[pump]\ngdd_fs2 = 2e4\ngain = 7.5\n\
             [grid]\npoints = 256\n[sweep]\nstart = -1000\nstop = 1000\npoints = 5\ngain_policy = fixed_gain\n",
        )
        .unwrap();
        assert_eq!(cfg.crystal.temperature_k, 323.0);
        assert_eq!(cfg.crystal.sellmeier.a[0], 5.8);
        assert_eq!(cfg.pump.gdd_fs2, 2e4);
        assert_eq!(cfg.gain, 7.5);
        assert_eq!(cfg.grid.points, 256);
        assert_eq!(cfg.sweep.values(), vec![-1000.0, -500.0, 0.0, 500.0, 1000.0]);
        assert_eq!(cfg.sweep.gain_policy, GainPolicy::FixedGain);
    }

    #[test]
    fn pump_power_variable_switches_default_range() {
        let cfg = RunConfig::from_ini_str("[sweep]\nvariable = pump_power\n").unwrap();
        assert_eq!((cfg.sweep.start, cfg.sweep.stop, cfg.sweep.points), (0.0, 1.6e13, 33));
        let kept = RunConfig::from_ini_str("[sweep]\npoints = 3\nvariable = pump_power\n").unwrap();
        assert_eq!((kept.sweep.start, kept.sweep.stop, kept.sweep.points), (0.0, 1.6e13, 3));
    }

    #[test]
    fn errors_are_config_kind() {
        for text in [
            "[laser]\nx = 1\n",
            "[pump]\ncolor = red\n",
            "[pump]\ntau_fwhm_fs = abc\n",
            "[pump]\ntau_fwhm_fs = -3\n",
            "[grid]\npoints = 16\n",
            "[sweep]\nstart = 5\nstop = 1\n",
            "[sweep]\ngain_policy = sometimes\n",
            "[crystal]\nsellmeier_a7 = 1\n",
            "[crystal]\nsellmeier_b0 = 1\n",
            "loose = 1\n",
            "[pump\n",
        ] {
            let err = RunConfig::from_ini_str(text).unwrap_err();
            assert_eq!(err.kind(), crate::ErrorKind::Config, "{text:?} gave {err}");
        }
    }

    #[test]
    fn overrides_win() {
        let mut cfg = RunConfig::from_ini_str("[pump]\ngdd_fs2 = 100\n").unwrap();
        cfg.apply_override("pump.gdd_fs2=-250").unwrap();
        assert_eq!(cfg.pump.gdd_fs2, -250.0);
        assert!(cfg.apply_override("pump.gdd_fs2").is_err());
        assert!(cfg.apply_override("gdd_fs2=1").is_err());
    }

    #[test]
    fn canonical_form_round_trips_and_hashes() {
        let mut cfg = RunConfig::default();
        cfg.apply_override("pump.gdd_fs2=12345.5").unwrap();
        cfg.apply_override("sweep.seed=99").unwrap();
        let back = RunConfig::from_ini_str(&cfg.canonical_ini()).unwrap();
        assert_eq!(back.canonical_ini(), cfg.canonical_ini());
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
        assert_ne!(RunConfig::default().hash(), cfg.hash());
    }

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }

    #[test]
    fn gain_policies() {
        assert_eq!(GainPolicy::FixedGain.gain(10.0, 260.0, 520.0), 10.0);
        assert!((GainPolicy::FixedEnergy.gain(10.0, 260.0, 520.0) - 10.0 / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(GainPolicy::FixedEnergy.gain(10.0, 260.0, 260.0), 10.0);
    }

    #[test]
    fn single_point_sweep() {
        let cfg = RunConfig::from_ini_str("[sweep]\nstart = 5\nstop = 5\npoints = 1\n").unwrap();
        assert_eq!(cfg.sweep.values(), vec![5.0]);
    }
}
