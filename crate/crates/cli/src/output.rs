use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;
use twinbeam::config::RunConfig;
use twinbeam::sweep::Provenance;
use twinbeam::ErrorKind;

use crate::Common;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] twinbeam::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Numerical(String),

    #[error("refusing to run: {0}")]
    Resource(String),

    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Numerical => 3,
                ErrorKind::Resource => 4,
            },
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) | CliError::Json(_) => 3,
            CliError::Resource(_) => 4,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Configuration from `--config`, then `--set` overrides, then the dedicated
/// flags. `variable`, when given, is forced before any override is applied.
pub fn load_config(common: &Common, variable: Option<&str>) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = variable {
        cfg.set("sweep", "variable", v)?;
    }
    for assignment in &common.overrides {
        cfg.apply_override(assignment)?;
    }
    if let Some(gdd) = common.gdd {
        cfg.set("pump", "gdd_fs2", &gdd.to_string())?;
    }
    if let Some(tau) = common.tau_fwhm {
        cfg.set("pump", "tau_fwhm_fs", &tau.to_string())?;
    }
    if let Some(seed) = common.seed {
        cfg.sweep.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

/// `path`, or stdout when absent.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).and_then(|_| out.flush()).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

pub fn json_if_requested<T: Serialize>(common: &Common, value: &T) -> Result<()> {
    match &common.json {
        Some(path) => write_json(path, value),
        None => Ok(()),
    }
}

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        x.to_string()
    }
}

/// Provenance block, header row and rows, as CSV.
pub fn write_table<W: Write>(out: W, provenance: &Provenance, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = out;
    provenance.write(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|source| CliError::Io { path: "output".into(), source })
}

/// Named numeric columns of a CSV file with `#` comment lines.
pub fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.clone();
    let index: Vec<usize> = names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| CliError::Usage(format!("{}: missing column `{name}`", path.display())))
        })
        .collect::<Result<_>>()?;
    let mut columns = vec![Vec::new(); names.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        for (col, &i) in columns.iter_mut().zip(&index) {
            let field = record.get(i).unwrap_or("");
            let value = field.parse::<f64>().map_err(|_| {
                CliError::Usage(format!("{}: row {}: `{field}` is not a number", path.display(), line + 1))
            })?;
            col.push(value);
        }
    }
    Ok(columns)
}
