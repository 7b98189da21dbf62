//! Input decoding, output encoding and the error envelope.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use belief_info::measures::{BeliefWeights, Categorical, JointCategorical, Units};
use belief_info::Error;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

/// A failure reported to the user, with its exit status.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(format!("malformed JSON: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    /// Stable machine-readable code and exit status.
    pub fn classify(&self) -> (&'static str, i32) {
        let Self::Core(e) = self else {
            return ("input_error", 2);
        };
        match e {
            Error::SupportMismatch { .. } => ("support_mismatch", 2),
            Error::InvalidOrder(_) => ("invalid_order", 2),
            Error::InvalidDistribution(_) => ("invalid_distribution", 2),
            Error::IndexOutOfRange { .. } => ("index_out_of_range", 2),
            Error::InvalidPerturbation(_) => ("invalid_perturbation", 2),
            Error::DimensionMismatch { .. } => ("dimension_mismatch", 2),
            Error::NotSpd(_) => ("not_spd", 2),
            Error::InvalidCount(_) => ("invalid_count", 2),
            Error::InvalidConfig(_) => ("invalid_config", 2),
            Error::EmptyInput => ("empty_input", 2),
            Error::InconsistentClassCount { .. } => ("inconsistent_class_count", 2),
            Error::InvalidRecord(_) => ("invalid_record", 2),
            Error::Csv(_) => ("csv", 2),
            Error::Io(_) => ("io", 2),
            Error::UndefinedRatio { .. } => ("undefined_ratio", 3),
            Error::ConflictingDivergence => ("conflicting_divergence", 3),
            Error::NonFiniteInfo => ("non_finite_info", 3),
            Error::ZeroDenominator { .. } => ("zero_denominator", 3),
            Error::UndefinedKernel { .. } => ("undefined_kernel", 3),
            Error::DegenerateResult => ("degenerate_result", 3),
            Error::TargetOutOfRange { .. } => ("target_out_of_range", 3),
            Error::NegativeLambda(_) => ("negative_lambda", 3),
            Error::EvaluationFailure(_) => ("evaluation_failure", 3),
            Error::Infeasible(_) => ("infeasible", 4),
            Error::NoConvergence { .. } => ("no_convergence", 5),
        }
    }

    pub fn envelope(&self) -> Value {
        let (code, _) = self.classify();
        json!({ "error": { "code": code, "message": self.to_string() } })
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Inline JSON, or the path of a file holding it.
pub fn load_json(arg: &str) -> CliResult<Value> {
    let trimmed = arg.trim_start();
    let inline = trimmed.starts_with(['{', '[', '"']) || trimmed.parse::<f64>().is_ok();
    let text = if inline {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| CliError::Input(format!("cannot read {arg:?}: {e}")))?
    };
    Ok(serde_json::from_str(&text)?)
}

pub fn decode<T: DeserializeOwned>(arg: &str) -> CliResult<T> {
    Ok(serde_json::from_value(load_json(arg)?)?)
}

fn numbers(value: &Value, what: &str) -> CliResult<Vec<f64>> {
    serde_json::from_value(value.clone()).map_err(|_| CliError::Input(format!("{what} must be an array of numbers")))
}

/// `[..]`, `{"probs": [..]}` or `{"weights": [..]}`.
fn vector_field(value: &Value, what: &str) -> CliResult<Vec<f64>> {
    match value {
        Value::Array(_) => numbers(value, what),
        Value::Object(map) => match (map.get("probs"), map.get("weights")) {
            (Some(v), None) | (None, Some(v)) => numbers(v, what),
            _ => Err(CliError::Input(format!("{what}: expected exactly one of \"probs\" or \"weights\""))),
        },
        _ => Err(CliError::Input(format!("{what}: expected an array or object"))),
    }
}

pub fn categorical(arg: &str, what: &str) -> CliResult<Categorical> {
    Ok(Categorical::new(vector_field(&load_json(arg)?, what)?)?)
}

pub fn weights(arg: &str, what: &str) -> CliResult<BeliefWeights> {
    Ok(BeliefWeights::new(vector_field(&load_json(arg)?, what)?)?)
}

pub fn weights_list(arg: &str, what: &str) -> CliResult<Vec<BeliefWeights>> {
    match load_json(arg)? {
        Value::Array(items) => items.iter().map(|v| Ok(BeliefWeights::new(vector_field(v, what)?)?)).collect(),
        _ => Err(CliError::Input(format!("{what} must be an array of weight vectors"))),
    }
}

pub fn joint(arg: &str) -> CliResult<JointCategorical> {
    let value = load_json(arg)?;
    let rows = match &value {
        Value::Object(map) => map.get("probs").cloned().unwrap_or(Value::Null),
        other => other.clone(),
    };
    let rows: Vec<Vec<f64>> = serde_json::from_value(rows)
        .map_err(|_| CliError::Input("joint must be a matrix of numbers or {\"probs\": [[..]]}".into()))?;
    Ok(JointCategorical::new(rows)?)
}

pub fn reals(arg: &str, what: &str) -> CliResult<Vec<f64>> {
    numbers(&load_json(arg)?, what)
}

/// JSON encoding of a real, with infinities as strings.
pub fn real(v: f64) -> Value {
    if v == f64::INFINITY {
        json!("+inf")
    } else if v == f64::NEG_INFINITY {
        json!("-inf")
    } else {
        json!(v)
    }
}

pub fn parse_units(s: &str) -> Result<Units, String> {
    match s {
        "bits" => Ok(Units::Bits),
        "nats" => Ok(Units::Nats),
        other => Err(format!("unknown units {other:?} (expected bits or nats)")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Where results go: stdout, plus named artifacts under `--out` when given.
pub struct Sink {
    pub out_dir: Option<PathBuf>,
}

impl Sink {
    pub fn artifact(&self, name: &str) -> CliResult<Option<PathBuf>> {
        match &self.out_dir {
            None => Ok(None),
            Some(dir) => {
                fs::create_dir_all(dir)?;
                Ok(Some(dir.join(name)))
            }
        }
    }

    pub fn write(&self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        fs::write(path, bytes).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
    }
}

pub fn pretty(value: &impl serde::Serialize) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
