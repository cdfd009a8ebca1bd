//! Report records and their JSON / CSV files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::CliError;

/// One output row: `quantity,value,stderr,method,N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantity {
    pub quantity: String,
    #[serde(serialize_with = "extended_f64")]
    pub value: f64,
    #[serde(serialize_with = "optional_f64")]
    pub stderr: Option<f64>,
    pub method: String,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Whether the value is in nats (rescaled by `--bits`).
    #[serde(skip)]
    pub nats: bool,
}

impl Quantity {
    pub fn new(quantity: impl Into<String>, value: f64, method: &str) -> Self {
        Quantity {
            quantity: quantity.into(),
            value,
            stderr: None,
            method: method.to_string(),
            n: None,
            nats: true,
        }
    }

    /// A value that is not an entropy-like quantity (distances, residuals).
    pub fn plain(quantity: impl Into<String>, value: f64, method: &str) -> Self {
        Quantity {
            nats: false,
            ..Quantity::new(quantity, value, method)
        }
    }

    pub fn with_stderr(mut self, se: Option<f64>) -> Self {
        self.stderr = se;
        self
    }

    pub fn with_n(mut self, n: Option<usize>) -> Self {
        self.n = n;
        self
    }
}

/// Non-finite values become the strings `inf`, `-inf`, `nan`.
fn extended_f64<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&fmt_value(*v))
    }
}

fn optional_f64<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => extended_f64(x, s),
        None => s.serialize_none(),
    }
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub units: &'static str,
    pub config: ExperimentConfig,
    pub quantities: Vec<Quantity>,
    pub details: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement: Option<Value>,
    /// The only field that differs between identical runs.
    pub timing: Timing,
}

impl Report {
    pub fn to_bits(&mut self) {
        for q in self.quantities.iter_mut().filter(|q| q.nats) {
            q.value /= std::f64::consts::LN_2;
            q.stderr = q.stderr.map(|s| s / std::f64::consts::LN_2);
        }
        self.units = "bits";
    }

    fn csv_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["quantity", "value", "stderr", "method", "N"])
            .map_err(|e| CliError::Io(e.to_string()))?;
        for q in &self.quantities {
            w.write_record([
                q.quantity.clone(),
                fmt_value(q.value),
                q.stderr.map(fmt_value).unwrap_or_default(),
                q.method.clone(),
                q.n.map(|n| n.to_string()).unwrap_or_default(),
            ])
            .map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }

    /// Writes `report.json` and `report.csv` into `dir`. Each file is
    /// written beside its target and renamed into place.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf), CliError> {
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
        let mut json = serde_json::to_vec_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        json.push(b'\n');
        let csv = self.csv_bytes()?;
        fs::create_dir_all(dir).map_err(io)?;
        let json_path = dir.join("report.json");
        let csv_path = dir.join("report.csv");
        for (path, bytes) in [(&json_path, &json), (&csv_path, &csv)] {
            let tmp = path.with_extension("tmp");
            let mut f = fs::File::create(&tmp).map_err(io)?;
            f.write_all(bytes).map_err(io)?;
            f.sync_all().map_err(io)?;
            fs::rename(&tmp, path).map_err(io)?;
        }
        Ok((json_path, csv_path))
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for q in &self.quantities {
            s.push_str(&format!("{} = {}", q.quantity, fmt_value(q.value)));
            if let Some(se) = q.stderr {
                s.push_str(&format!(" ± {}", fmt_value(se)));
            }
            s.push_str(&format!("  [{}", q.method));
            if let Some(n) = q.n {
                s.push_str(&format!(", N={n}"));
            }
            s.push_str("]\n");
        }
        s
    }
}
