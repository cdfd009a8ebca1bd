//! Experiment configuration: the JSON schema accepted by every subcommand.

use std::path::Path;

use mpl_core::continuous::{
    AtomicMeasure, ContinuousPotential, GridDensity, MarginalSpec, PotentialKind, Table,
};
use mpl_core::measures::Alphabet;
use mpl_core::{gibbs_measure, marginals, product_measure, JointPmf, Masses, Pmf, PotentialTensor};
use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Subcommands, named as on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Entropy,
    Pressure,
    Gibbs,
    MutualPressure,
    Duality,
    Legendre,
    Equilibrium,
    Sanov,
    Continuous,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Entropy => "entropy",
            Command::Pressure => "pressure",
            Command::Gibbs => "gibbs",
            Command::MutualPressure => "mutual-pressure",
            Command::Duality => "duality",
            Command::Legendre => "legendre",
            Command::Equilibrium => "equilibrium",
            Command::Sanov => "sanov",
            Command::Continuous => "continuous",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    Exact,
    Mc,
    Limit,
    All,
}

impl MethodChoice {
    pub fn name(self) -> &'static str {
        match self {
            MethodChoice::Exact => "exact",
            MethodChoice::Mc => "mc",
            MethodChoice::Limit => "limit",
            MethodChoice::All => "all",
        }
    }
}

/// A potential on a finite product alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero { shape: Vec<usize> },
    Constant { shape: Vec<usize>, value: f64 },
    /// `β·1{all coordinates equal}` on `{0..d−1}^n`.
    Diagonal { d: usize, n: usize, beta: f64 },
    /// `Σ gᵢ(tᵢ)`.
    Separable { parts: Vec<Vec<f64>> },
    /// Row-major values.
    Table { shape: Vec<usize>, values: Vec<f64> },
}

/// A marginal: explicit weights, or `"uniform"` / `"gibbs"` (the Gibbs
/// marginal of the potential on that axis).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MarginalConfig {
    Weights(Vec<f64>),
    Named(NamedMarginal),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedMarginal {
    Uniform,
    Gibbs,
}

/// A joint measure on a finite product alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JointConfig {
    /// Row-major weights.
    Table { shape: Vec<usize>, weights: Vec<f64> },
    Product { factors: Vec<Vec<f64>> },
    /// The Gibbs measure of the configured potential.
    Gibbs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SanovConfig {
    pub reference: Vec<f64>,
    pub target: Vec<f64>,
    pub delta: f64,
    /// Sample sizes to tabulate.
    pub ns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ContinuousPotentialConfig {
    Zero,
    Constant { value: f64 },
    Product { beta: f64 },
    Gaussian { a: f64 },
    Linear { coefficients: Vec<f64> },
    Expr {
        expr: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bound: Option<f64>,
    },
    /// Multilinear interpolation of row-major `values` on per-axis `points`.
    Table { points: Vec<Vec<f64>>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ContinuousMarginalConfig {
    Uniform,
    /// Density values on an equispaced grid over `[−R, R]`, normalized on load.
    Grid { values: Vec<f64> },
    Atomic { points: Vec<f64>, masses: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousConfig {
    pub radius: f64,
    pub dim: usize,
    pub potential: ContinuousPotentialConfig,
    /// Without marginals the run checks duality at the Gibbs marginals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginals: Option<Vec<ContinuousMarginalConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
}

/// Everything a run needs. Fields a subcommand does not use are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabets: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginals: Option<Vec<MarginalConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<JointConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<JointConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sanov: Option<SanovConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuous: Option<ContinuousConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodChoice>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_TRIALS: usize = 8;
pub const DEFAULT_ORDER: usize = 32;
pub const DEFAULT_LEVELS: usize = 16;
pub const DEFAULT_TOL: f64 = 1e-12;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }

    /// Rejects missing required fields and fields `cmd` does not use.
    pub fn validate(&self, cmd: Command) -> Result<(), CliError> {
        use Command::*;
        let present: [(&str, bool); 11] = [
            ("alphabets", self.alphabets.is_some()),
            ("potential", self.potential.is_some()),
            ("marginals", self.marginals.is_some()),
            ("joint", self.joint.is_some()),
            ("reference", self.reference.is_some()),
            ("sanov", self.sanov.is_some()),
            ("continuous", self.continuous.is_some()),
            ("method", self.method.is_some()),
            ("N", self.n.is_some()),
            ("samples", self.samples.is_some()),
            ("budget", self.budget.is_some()),
        ];
        let (required, optional): (&[&str], &[&str]) = match cmd {
            Entropy => (&["joint"], &["reference", "alphabets"]),
            Pressure => (&["potential"], &["alphabets"]),
            Gibbs => (&["potential"], &["alphabets"]),
            MutualPressure => (
                &["potential", "marginals"],
                &["alphabets", "method", "N", "samples", "budget"],
            ),
            Duality => (&["potential", "marginals"], &["alphabets"]),
            Legendre => (&["joint"], &["alphabets"]),
            Equilibrium => (&["potential", "joint"], &["alphabets"]),
            Sanov => (&["sanov"], &[]),
            Continuous => (&["continuous"], &["method", "N", "samples"]),
        };
        for (name, is_set) in present {
            if is_set && !required.contains(&name) && !optional.contains(&name) {
                return Err(invalid(format!("field `{name}` is not used by `{}`", cmd.name())));
            }
            if !is_set && required.contains(&name) {
                return Err(invalid(format!("`{}` needs field `{name}`", cmd.name())));
            }
        }
        if self.trials.is_some() && cmd != Legendre {
            return Err(invalid(format!("field `trials` is not used by `{}`", cmd.name())));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid(format!("tol must be positive, got {t}")));
            }
        }
        if self.samples == Some(0) || self.trials == Some(0) || self.n == Some(0) {
            return Err(invalid("N, samples and trials must be positive"));
        }
        let method = self.method.unwrap_or(MethodChoice::Limit);
        let needs_n = matches!(method, MethodChoice::Exact | MethodChoice::Mc | MethodChoice::All);
        match cmd {
            MutualPressure if needs_n && self.n.is_none() => {
                return Err(invalid(format!("method `{}` needs field `N`", method.name())));
            }
            Continuous => {
                if method == MethodChoice::Exact {
                    return Err(invalid("continuous runs support methods limit, mc and all"));
                }
                let c = self.continuous.as_ref().expect("checked above");
                if needs_n && (self.n.is_none() || c.marginals.is_none()) {
                    return Err(invalid(format!(
                        "method `{}` needs field `N` and continuous marginals",
                        method.name()
                    )));
                }
            }
            _ => {}
        }
        if let (Some(JointConfig::Gibbs), false) = (&self.joint, self.potential.is_some()) {
            return Err(invalid("joint `gibbs` needs a potential"));
        }
        if matches!(self.reference, Some(JointConfig::Gibbs)) {
            return Err(invalid("reference cannot be `gibbs`"));
        }
        Ok(())
    }

    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or(DEFAULT_TOL)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn alphabet_list(&self, shape: &[usize]) -> Result<Vec<Alphabet>, CliError> {
        match &self.alphabets {
            None => Ok(shape.iter().map(|&d| Alphabet::indexed(d)).collect()),
            Some(labels) => {
                if labels.len() != shape.len() {
                    return Err(invalid(format!(
                        "{} alphabets for {} coordinates",
                        labels.len(),
                        shape.len()
                    )));
                }
                labels
                    .iter()
                    .map(|l| Alphabet::new(l.iter().cloned()).map_err(CliError::from))
                    .collect()
            }
        }
    }

    pub fn potential(&self) -> Result<PotentialTensor<f64>, CliError> {
        let cfg = self.potential.as_ref().ok_or_else(|| invalid("missing potential"))?;
        let h = match cfg {
            PotentialConfig::Zero { shape } => PotentialTensor::constant(&nonempty(shape)?, 0.0),
            PotentialConfig::Constant { shape, value } => {
                PotentialTensor::constant(&nonempty(shape)?, *value)
            }
            PotentialConfig::Diagonal { d, n, beta } => {
                if *d == 0 || *n == 0 {
                    return Err(invalid("diagonal potential needs d, n ≥ 1"));
                }
                PotentialTensor::diagonal(*d, *n, *beta)
            }
            PotentialConfig::Separable { parts } => PotentialTensor::separable(parts)?,
            PotentialConfig::Table { shape, values } => {
                PotentialTensor::from_tensor(table(shape, values)?)?
            }
        };
        let alphabets = self.alphabet_list(&h.shape())?;
        Ok(PotentialTensor::new(alphabets, h.values().clone())?)
    }

    pub fn marginals(&self, h: Option<&PotentialTensor<f64>>) -> Result<Vec<Pmf<f64>>, CliError> {
        let cfg = self.marginals.as_ref().ok_or_else(|| invalid("missing marginals"))?;
        let shape = match h {
            Some(h) => h.shape(),
            None => vec![0; cfg.len()],
        };
        if cfg.len() != shape.len() {
            return Err(invalid(format!(
                "{} marginals for a potential on {} coordinates",
                cfg.len(),
                shape.len()
            )));
        }
        let gibbs = h.map(|h| marginals(&gibbs_measure(h)));
        cfg.iter()
            .enumerate()
            .map(|(i, m)| {
                let alphabet = h.map(|h| h.alphabets()[i].clone());
                match m {
                    MarginalConfig::Weights(w) => match alphabet {
                        Some(a) => Pmf::new(a, w.clone()),
                        None => Pmf::from_weights(w.clone()),
                    }
                    .map_err(CliError::from),
                    MarginalConfig::Named(NamedMarginal::Uniform) => {
                        Ok(Pmf::uniform(alphabet.ok_or_else(|| invalid("uniform needs a potential"))?))
                    }
                    MarginalConfig::Named(NamedMarginal::Gibbs) => Ok(gibbs
                        .as_ref()
                        .ok_or_else(|| invalid("gibbs needs a potential"))?[i]
                        .clone()),
                }
            })
            .collect()
    }

    fn joint_from(&self, cfg: &JointConfig) -> Result<JointPmf<f64>, CliError> {
        let mu = match cfg {
            JointConfig::Table { shape, weights } => JointPmf::from_tensor(table(shape, weights)?)?,
            JointConfig::Product { factors } => {
                let pmfs = factors
                    .iter()
                    .map(|w| Pmf::from_weights(w.clone()))
                    .collect::<mpl_core::Result<Vec<_>>>()?;
                product_measure(&pmfs)?
            }
            JointConfig::Gibbs => return Ok(gibbs_measure(&self.potential()?)),
        };
        let alphabets = self.alphabet_list(&mu.shape())?;
        Ok(JointPmf::new(alphabets, mu.weights().clone())?)
    }

    pub fn joint(&self) -> Result<JointPmf<f64>, CliError> {
        self.joint_from(self.joint.as_ref().ok_or_else(|| invalid("missing joint"))?)
    }

    pub fn reference(&self) -> Result<Option<JointPmf<f64>>, CliError> {
        self.reference.as_ref().map(|r| self.joint_from(r)).transpose()
    }
}

fn nonempty(shape: &[usize]) -> Result<Vec<usize>, CliError> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(invalid(format!("shape {shape:?} must be nonempty with positive sizes")));
    }
    Ok(shape.to_vec())
}

fn table(shape: &[usize], values: &[f64]) -> Result<ArrayD<f64>, CliError> {
    let shape = nonempty(shape)?;
    ArrayD::from_shape_vec(IxDyn(&shape), values.to_vec()).map_err(|_| {
        invalid(format!(
            "{} values do not fill shape {shape:?}",
            values.len()
        ))
    })
}

impl ContinuousConfig {
    pub fn order(&self) -> usize {
        self.order.unwrap_or(DEFAULT_ORDER)
    }

    pub fn levels(&self) -> usize {
        self.levels.unwrap_or(DEFAULT_LEVELS)
    }

    pub fn potential(&self) -> Result<ContinuousPotential, CliError> {
        let kind = match &self.potential {
            ContinuousPotentialConfig::Zero => PotentialKind::Zero,
            ContinuousPotentialConfig::Constant { value } => PotentialKind::Constant(*value),
            ContinuousPotentialConfig::Product { beta } => PotentialKind::Product { beta: *beta },
            ContinuousPotentialConfig::Gaussian { a } => PotentialKind::Gaussian { a: *a },
            ContinuousPotentialConfig::Linear { coefficients } => PotentialKind::Linear {
                coefficients: coefficients.clone(),
            },
            ContinuousPotentialConfig::Expr { expr, bound } => {
                let h = ContinuousPotential::expr(self.radius, self.dim, expr)?;
                return Ok(match bound {
                    Some(b) => h.with_bound(*b)?,
                    None => h,
                });
            }
            ContinuousPotentialConfig::Table { points, values } => {
                let shape: Vec<usize> = points.iter().map(Vec::len).collect();
                PotentialKind::Table(Table::new(points.clone(), table(&shape, values)?)?)
            }
        };
        Ok(ContinuousPotential::new(self.radius, self.dim, kind)?)
    }

    pub fn marginals(&self) -> Result<Option<Vec<MarginalSpec>>, CliError> {
        let Some(ms) = &self.marginals else {
            return Ok(None);
        };
        if ms.len() != self.dim {
            return Err(invalid(format!("{} marginals for dimension {}", ms.len(), self.dim)));
        }
        ms.iter()
            .map(|m| {
                Ok(match m {
                    ContinuousMarginalConfig::Uniform => MarginalSpec::uniform(self.radius)?,
                    ContinuousMarginalConfig::Grid { values } => {
                        MarginalSpec::Grid(GridDensity::normalized(self.radius, values.clone())?)
                    }
                    ContinuousMarginalConfig::Atomic { points, masses } => {
                        MarginalSpec::Atomic(AtomicMeasure::new(points.clone(), masses.clone())?)
                    }
                })
            })
            .collect::<Result<Vec<_>, CliError>>()
            .map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ExperimentConfig {
        serde_json::from_str(text).unwrap()
    }

    #[test]
    fn rejects_fields_the_command_ignores() {
        let c = parse(r#"{"potential": {"kind": "zero", "shape": [2]}, "N": 4}"#);
        assert!(c.validate(Command::Pressure).is_err());
        let c = parse(r#"{"potential": {"kind": "zero", "shape": [2]}}"#);
        assert!(c.validate(Command::Pressure).is_ok());
        assert!(c.validate(Command::Duality).is_err());
    }

    #[test]
    fn finite_n_methods_need_n() {
        let base = r#""potential": {"kind": "zero", "shape": [2, 2]}, "marginals": ["uniform", "uniform"]"#;
        let c = parse(&format!(r#"{{{base}, "method": "mc"}}"#));
        assert!(c.validate(Command::MutualPressure).is_err());
        let c = parse(&format!(r#"{{{base}, "method": "mc", "N": 5}}"#));
        assert!(c.validate(Command::MutualPressure).is_ok());
        let c = parse(&format!(r#"{{{base}}}"#));
        assert!(c.validate(Command::MutualPressure).is_ok());
    }

    #[test]
    fn named_marginals() {
        let c = parse(
            r#"{"potential": {"kind": "table", "shape": [2, 2], "values": [1.0, 0.0, 0.0, 0.0]},
                "marginals": ["uniform", "gibbs"]}"#,
        );
        let h = c.potential().unwrap();
        let m = c.marginals(Some(&h)).unwrap();
        assert_eq!(m[0].weights(), &[0.5, 0.5]);
        let e = std::f64::consts::E;
        assert!((m[1].weights()[0] - (e + 1.0) / (e + 3.0)).abs() < 1e-15);
    }

    #[test]
    fn table_shape_must_match() {
        let c = parse(r#"{"potential": {"kind": "table", "shape": [2, 2], "values": [1.0]}}"#);
        assert!(matches!(c.potential(), Err(CliError::Validation(_))));
        let c = parse(r#"{"alphabets": [["a"]], "potential": {"kind": "zero", "shape": [2]}}"#);
        assert!(c.potential().is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let text = r#"{"continuous": {"radius": 1.0, "dim": 2, "potential": {"kind": "expr", "expr": "x*y"},
                       "marginals": [{"kind": "uniform"}, {"kind": "atomic", "points": [0.0], "masses": [1.0]}]},
                       "method": "all", "N": 10}"#;
        let c = parse(text);
        let again: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
        assert!(c.validate(Command::Continuous).is_ok());
        assert!(c.continuous.unwrap().marginals().unwrap().unwrap().len() == 2);
    }
}
