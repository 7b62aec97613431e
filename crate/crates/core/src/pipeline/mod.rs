//! End-to-end orchestration: infer, validate, adapt, re-infer, report.
//! Also the two dataset experiments: metric AUC tables and adaptation gain.

mod assess;
mod config;
mod eval;
mod experiment;
mod run;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adapters::AdapterError;
use crate::latent::LatentError;
use crate::metrics::{MetricError, MetricKind};
use crate::search::SearchError;
use crate::transforms::TransformError;
use crate::validator::ValidatorError;

pub use assess::{Assessment, Assessor, GenContext, Prediction};
pub use config::{AdapterSection, MinilangSection, PipelineConfig, Strategy, Task};
pub use eval::{evaluate_metrics, probe_digest, EvalOptions, EvalOutput, PROBE_VECTORS};
pub use experiment::{adaptation_gain, AdaptationGain};
pub use run::{input_payload, run_pipeline, Adaptation, Attempt, AttemptStatus, LatentShift, RunReport, Timing};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("input: {0}")]
    Input(String),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error("metric {kind}: {source}")]
    Metric { kind: MetricKind, source: MetricError },
    #[error(transparent)]
    Validator(#[from] ValidatorError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Latent(#[from] LatentError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("manifest {path}: {message}")]
    Manifest { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Lowercase hex SHA-256.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A seed for one named consumer, derived from the run seed.
pub fn sub_seed(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(tag.as_bytes());
    h.update(seed.to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().unwrap())
}
