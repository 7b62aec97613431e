use std::path::{Path, PathBuf};

use minilang::DEFAULT_FUEL;
use serde::{Deserialize, Serialize};

use super::{digest, PipelineError};
use crate::adapters::{AdapterSpec, Builtin};
use crate::latent::LatentConfig;
use crate::search::{ReviseConfig, SearchConfig};
use crate::validator::ValidatorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    Classification,
    Generation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Evolutionary search over semantics-preserving input transforms.
    Search,
    /// Bounded ascent in the adapter's embedding space.
    Latent,
    /// Window-revising constrained decoding.
    Decode,
}

impl Strategy {
    pub fn allowed_for(self, task: Task) -> bool {
        match self {
            Strategy::Search => true,
            Strategy::Latent => task == Task::Classification,
            Strategy::Decode => task == Task::Generation,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdapterSection {
    /// `builtin:<name>` or `cmd:<command>`; defaults to the task's mock.
    pub spec: Option<AdapterSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinilangSection {
    pub fuel: u64,
}

impl Default for MinilangSection {
    fn default() -> Self {
        MinilangSection { fuel: DEFAULT_FUEL }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub task: Task,
    pub seed: u64,
    /// Defaults to `[search, latent]` for classification and
    /// `[search, decode]` for generation.
    pub strategies: Option<Vec<Strategy>>,
    pub max_rounds: Option<usize>,
    pub report: Option<PathBuf>,
    pub adapter: AdapterSection,
    /// Defaults to entropy for classification, perplexity for generation.
    pub validator: Option<ValidatorConfig>,
    pub search: SearchConfig,
    pub latent: LatentConfig,
    pub decode: ReviseConfig,
    pub minilang: MinilangSection,
}

impl PipelineConfig {
    pub fn for_task(task: Task) -> Self {
        PipelineConfig {
            task,
            ..PipelineConfig::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn strategy_order(&self) -> Vec<Strategy> {
        self.strategies.clone().unwrap_or_else(|| match self.task {
            Task::Classification => vec![Strategy::Search, Strategy::Latent],
            Task::Generation => vec![Strategy::Search, Strategy::Decode],
        })
    }

    pub fn rounds(&self) -> usize {
        self.max_rounds.unwrap_or(1)
    }

    pub fn adapter_spec(&self) -> AdapterSpec {
        self.adapter.spec.clone().unwrap_or(match self.task {
            Task::Classification => AdapterSpec::Builtin(Builtin::Classifier),
            Task::Generation => AdapterSpec::Builtin(Builtin::Generator),
        })
    }

    pub fn validator(&self) -> ValidatorConfig {
        self.validator.clone().unwrap_or_else(|| match self.task {
            Task::Classification => ValidatorConfig::default(),
            Task::Generation => ValidatorConfig::for_generation(),
        })
    }

    pub fn set_threshold(&mut self, t: f64) {
        let mut v = self.validator();
        v.threshold = t;
        self.validator = Some(v);
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        let v = self.validator();
        v.validate()?;
        for m in &v.metrics {
            let fits = match self.task {
                Task::Classification => m.kind.is_classification(),
                Task::Generation => m.kind.is_generation(),
            };
            if !fits {
                return bad(format!("metric {} does not apply to {:?} tasks", m.kind, self.task));
            }
        }
        self.search.validate()?;
        self.latent.validate()?;
        if self.decode.window == 0 {
            return bad("decode window must be at least 1".into());
        }
        if self.rounds() == 0 {
            return bad("max_rounds must be at least 1".into());
        }
        let order = self.strategy_order();
        if order.is_empty() {
            return bad("no strategies configured".into());
        }
        if let Some(s) = order.iter().find(|s| !s.allowed_for(self.task)) {
            return bad(format!("strategy {s:?} does not apply to {:?} tasks", self.task));
        }
        Ok(())
    }

    /// Digest of the effective configuration; the report path is excluded.
    pub fn digest(&self) -> String {
        let resolved = PipelineConfig {
            strategies: Some(self.strategy_order()),
            max_rounds: Some(self.rounds()),
            report: None,
            adapter: AdapterSection {
                spec: Some(self.adapter_spec()),
            },
            validator: Some(self.validator()),
            ..self.clone()
        };
        digest(serde_json::to_string(&resolved).expect("config serializes").as_bytes())
    }
}
