//! Command-line front end for `mpl-core`: JSON configs in, JSON and CSV
//! reports out.

mod commands;
pub mod config;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::Value;
use thiserror::Error;

pub use config::{Command, ExperimentConfig, MethodChoice};
pub use report::{Quantity, Report, Timing};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// 2 for bad input, 3 for numerical failure, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Numeric(_) => "nonconvergence",
            CliError::Io(_) => "io",
        }
    }

    /// The single stderr line: `error[tag] message`.
    pub fn line(&self) -> String {
        let msg = self.to_string().replace('\n', " ");
        format!("error[{}] {msg}", self.tag())
    }
}

impl From<mpl_core::Error> for CliError {
    fn from(e: mpl_core::Error) -> Self {
        match e {
            mpl_core::Error::NonConvergence { .. } | mpl_core::Error::BudgetExceeded { .. } => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub method: Option<MethodChoice>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub bits: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if self.method.is_some() {
            cfg.method = self.method;
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if self.tol.is_some() {
            cfg.tol = self.tol;
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.to_string_lossy().into_owned());
        }
    }
}

/// Validates `cfg` and computes the report without touching the file system.
pub fn evaluate(cmd: Command, cfg: ExperimentConfig, bits: bool) -> Result<Report, CliError> {
    cfg.validate(cmd)?;
    let start = Instant::now();
    let outcome = commands::dispatch(cmd, &cfg)?;
    let mut report = Report {
        version: env!("CARGO_PKG_VERSION"),
        command: cmd.name(),
        seed: cfg.seed(),
        units: "nats",
        config: cfg,
        quantities: outcome.quantities,
        details: outcome.details,
        agreement: outcome.agreement,
        timing: Timing {
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        },
    };
    if bits {
        report.to_bits();
    }
    Ok(report)
}

/// Loads, runs and writes `report.json` / `report.csv`. Nothing is written
/// unless the whole run succeeds.
pub fn run(cmd: Command, config: &Path, overrides: &Overrides) -> Result<(Report, PathBuf), CliError> {
    let mut cfg = ExperimentConfig::load(config)?;
    overrides.apply(&mut cfg);
    let report = evaluate(cmd, cfg, overrides.bits)?;
    let dir = PathBuf::from(report.config.out.as_deref().unwrap_or("."));
    report.write(&dir)?;
    Ok((report, dir))
}

/// A report as JSON with the timing block removed, for comparing runs.
pub fn comparable(report: &Value) -> Value {
    let mut v = report.clone();
    if let Value::Object(m) = &mut v {
        m.remove("timing");
    }
    v
}
