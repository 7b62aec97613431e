//! Model adapters: the capability interface, two deterministic built-in
//! mocks, and a subprocess client speaking the line-delimited JSON protocol.

mod classifier;
mod ngram;
pub mod protocol;
mod subprocess;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{GenerationResult, ProbVector};

pub use classifier::{embed_features, hidden_label, MockClassifier, MockClassifierSpec, LABELS};
pub(crate) use ngram::sample_index;
pub use ngram::{NgramModel, BOS, EOS};
pub use subprocess::SubprocessAdapter;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdapterError {
    #[error("adapter lacks capability `{0}`")]
    MissingCapability(String),
    #[error("token `{0}` is not in the vocabulary")]
    UnknownToken(String),
    #[error("input does not parse: {0}")]
    Parse(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("unknown op `{0}`")]
    UnknownOp(String),
    #[error("adapter unavailable: {0}")]
    Unavailable(String),
    #[error("adapter failure: {0}")]
    Internal(String),
}

impl AdapterError {
    /// Stable wire code.
    pub fn code(&self) -> &'static str {
        match self {
            AdapterError::MissingCapability(_) => "missing_capability",
            AdapterError::UnknownToken(_) => "unknown_token",
            AdapterError::Parse(_) => "parse_error",
            AdapterError::BadRequest(_) => "bad_request",
            AdapterError::UnknownOp(_) => "unknown_op",
            AdapterError::Unavailable(_) | AdapterError::Internal(_) => "internal",
        }
    }

    pub fn from_code(code: &str, message: String) -> Self {
        match code {
            "missing_capability" => AdapterError::MissingCapability(message),
            "unknown_token" => AdapterError::UnknownToken(message),
            "parse_error" => AdapterError::Parse(message),
            "bad_request" => AdapterError::BadRequest(message),
            "unknown_op" => AdapterError::UnknownOp(message),
            _ => AdapterError::Internal(message),
        }
    }

    /// The bare message, without the variant prefix.
    pub fn message(&self) -> String {
        match self {
            AdapterError::MissingCapability(m)
            | AdapterError::UnknownToken(m)
            | AdapterError::Parse(m)
            | AdapterError::BadRequest(m)
            | AdapterError::UnknownOp(m)
            | AdapterError::Unavailable(m)
            | AdapterError::Internal(m) => m.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    pub classify: bool,
    pub classify_stochastic: bool,
    pub embed: bool,
    pub classify_embedding: bool,
    pub generate: bool,
    pub sample: bool,
    pub step: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub flags: Flags,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub vocab: Vec<String>,
}

impl Capabilities {
    pub fn check(&self) -> Result<(), AdapterError> {
        let f = self.flags;
        if f.step && !f.generate {
            return Err(AdapterError::Internal("step declared without generate".into()));
        }
        if f.classify_embedding && !f.embed {
            return Err(AdapterError::Internal(
                "classify_embedding declared without embed".into(),
            ));
        }
        Ok(())
    }
}

/// A handle to a model. Methods take `&mut self` because remote sessions are
/// serial request/response channels.
pub trait Adapter: Send {
    fn id(&self) -> String;
    fn capabilities(&mut self) -> Result<Capabilities, AdapterError>;

    fn classify(&mut self, _source: &str) -> Result<ProbVector, AdapterError> {
        Err(AdapterError::MissingCapability("classify".into()))
    }
    fn classify_stochastic(&mut self, _source: &str, _seed: u64) -> Result<ProbVector, AdapterError> {
        Err(AdapterError::MissingCapability("classify_stochastic".into()))
    }
    fn embed(&mut self, _source: &str) -> Result<Vec<f64>, AdapterError> {
        Err(AdapterError::MissingCapability("embed".into()))
    }
    fn classify_embedding(&mut self, _z: &[f64]) -> Result<ProbVector, AdapterError> {
        Err(AdapterError::MissingCapability("classify_embedding".into()))
    }
    fn generate(&mut self, _prompt: &str, _max_len: usize) -> Result<GenerationResult, AdapterError> {
        Err(AdapterError::MissingCapability("generate".into()))
    }
    fn sample(
        &mut self,
        _prompt: &str,
        _n: usize,
        _temperature: f64,
        _seed: u64,
        _max_len: usize,
    ) -> Result<Vec<GenerationResult>, AdapterError> {
        Err(AdapterError::MissingCapability("sample".into()))
    }
    /// Next-token distribution after `prefix`, over the declared vocabulary.
    fn step(&mut self, _prefix: &[String]) -> Result<Vec<f64>, AdapterError> {
        Err(AdapterError::MissingCapability("step".into()))
    }
}

/// Which model to talk to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AdapterSpec {
    Builtin(Builtin),
    Command(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Builtin {
    Classifier,
    Generator,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Classifier => "classifier",
            Builtin::Generator => "ngram",
        }
    }
}

impl FromStr for Builtin {
    type Err = AdapterError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classifier" | "mock-classifier" => Ok(Builtin::Classifier),
            "ngram" | "generator" | "mock-generator" => Ok(Builtin::Generator),
            other => Err(AdapterError::Unavailable(format!("no built-in adapter `{other}`"))),
        }
    }
}

impl FromStr for AdapterSpec {
    type Err = AdapterError;
    /// `builtin:<name>` or `cmd:<shell command>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(name) = s.strip_prefix("builtin:") {
            Ok(AdapterSpec::Builtin(name.parse()?))
        } else if let Some(cmd) = s.strip_prefix("cmd:") {
            let cmd = cmd.trim().trim_matches('"').to_string();
            if cmd.is_empty() {
                return Err(AdapterError::Unavailable("empty command".into()));
            }
            Ok(AdapterSpec::Command(cmd))
        } else {
            Err(AdapterError::Unavailable(format!(
                "adapter `{s}` must start with `builtin:` or `cmd:`"
            )))
        }
    }
}

impl TryFrom<String> for AdapterSpec {
    type Error = AdapterError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<AdapterSpec> for String {
    fn from(s: AdapterSpec) -> Self {
        s.to_string()
    }
}

impl fmt::Display for AdapterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdapterSpec::Builtin(b) => write!(f, "builtin:{}", b.name()),
            AdapterSpec::Command(c) => write!(f, "cmd:{c}"),
        }
    }
}

impl AdapterSpec {
    /// Opens a new session.
    pub fn connect(&self) -> Result<Box<dyn Adapter>, AdapterError> {
        Ok(match self {
            AdapterSpec::Builtin(Builtin::Classifier) => Box::new(MockClassifier::default()),
            AdapterSpec::Builtin(Builtin::Generator) => Box::new(NgramModel::bundled()),
            AdapterSpec::Command(cmd) => Box::new(SubprocessAdapter::spawn(cmd)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing() {
        assert_eq!(
            "builtin:classifier".parse::<AdapterSpec>().unwrap(),
            AdapterSpec::Builtin(Builtin::Classifier)
        );
        assert_eq!(
            "cmd:\"onfly serve-mock\"".parse::<AdapterSpec>().unwrap(),
            AdapterSpec::Command("onfly serve-mock".into())
        );
        assert!("builtin:gpt".parse::<AdapterSpec>().is_err());
        assert!("classifier".parse::<AdapterSpec>().is_err());
        let s = AdapterSpec::Builtin(Builtin::Generator);
        assert_eq!(s.to_string().parse::<AdapterSpec>().unwrap(), s);
    }

    #[test]
    fn capability_invariants() {
        let mut c = Capabilities::default();
        c.flags.step = true;
        assert!(c.check().is_err());
        c.flags.generate = true;
        assert!(c.check().is_ok());
        c.flags.classify_embedding = true;
        assert!(c.check().is_err());
    }
}
