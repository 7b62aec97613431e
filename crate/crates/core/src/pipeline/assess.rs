use std::sync::Arc;

use minilang::{lex, prefix_viable, TokenKind};
use serde::{Deserialize, Serialize};

use super::{digest, sub_seed, PipelineError, Task};
use crate::adapters::{Adapter, Capabilities};
use crate::corpus::bundled_programs;
use crate::metrics::{
    bb_lab_prob, constant, ensemble_variance, entropy, fit_prototypes, mcd_variance, mean_token_entropy, perplexity,
    prompt_consistency, repr_distance, semantic_entropy, traj_signal, vanilla_confidence, GenerationResult,
    MetricError, MetricKind, MetricValue, ProbVector, PrototypeSet,
};
use crate::search::Payload;
use crate::transforms::{enumerate_prompt_sites, nl_perturb, PromptText, SynonymDict};
use crate::validator::{combine_v, Provenance, ValidatorConfig, WeightedMetric};

/// The model's answer on one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Prediction {
    Class {
        label: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        probs: Vec<f64>,
    },
    Generation {
        text: String,
        complete: bool,
        mean_logprob: Option<f64>,
    },
}

impl Prediction {
    pub fn label(&self) -> Option<usize> {
        match self {
            Prediction::Class { label, .. } => Some(*label),
            Prediction::Generation { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assessment {
    pub prediction: Prediction,
    pub validity: crate::validator::ValidityReport,
}

impl Assessment {
    pub fn v(&self) -> f64 {
        self.validity.v
    }
}

/// Generations shared by every output assessed for one prompt.
#[derive(Debug, Clone, Default)]
pub struct GenContext {
    prompt: String,
    samples: Option<Vec<GenerationResult>>,
    perturbed: Option<Vec<GenerationResult>>,
}

impl GenContext {
    pub fn for_prompt(prompt: &str) -> Self {
        GenContext {
            prompt: prompt.to_string(),
            ..GenContext::default()
        }
    }
}

fn metric_err(kind: MetricKind) -> impl Fn(MetricError) -> PipelineError {
    move |source| PipelineError::Metric { kind, source }
}

/// Runs inference and computes the configured uncertainty signals.
pub struct Assessor<'a> {
    adapter: &'a mut dyn Adapter,
    caps: Capabilities,
    cfg: ValidatorConfig,
    seed: u64,
    task: Task,
    protos: Option<Arc<PrototypeSet>>,
    dict: SynonymDict,
}

impl<'a> Assessor<'a> {
    /// Fails when the adapter cannot serve the task at all.
    pub fn new(
        adapter: &'a mut dyn Adapter,
        cfg: ValidatorConfig,
        seed: u64,
        task: Task,
    ) -> Result<Self, PipelineError> {
        let caps = adapter.capabilities()?;
        let (ok, need) = match task {
            Task::Classification => (caps.flags.classify, "classify"),
            Task::Generation => (caps.flags.generate, "generate"),
        };
        if !ok {
            return Err(crate::adapters::AdapterError::MissingCapability(need.into()).into());
        }
        Ok(Assessor {
            adapter,
            caps,
            cfg,
            seed,
            task,
            protos: None,
            dict: SynonymDict::builtin(),
        })
    }

    pub fn with_prototypes(mut self, protos: Option<Arc<PrototypeSet>>) -> Self {
        self.protos = protos;
        self
    }

    pub fn capabilities(&self) -> &Capabilities {
        &self.caps
    }

    pub fn adapter(&mut self) -> &mut dyn Adapter {
        &mut *self.adapter
    }

    pub fn config(&self) -> &ValidatorConfig {
        &self.cfg
    }

    fn provenance(&self, text: &str) -> Provenance {
        Provenance {
            adapter: self.adapter.id(),
            seed: self.seed,
            input_digest: digest(text.as_bytes()),
        }
    }

    /// Class prototypes from the bundled corpus, labelled by the adapter's
    /// own predictions.
    pub fn prototypes(&mut self) -> Result<Arc<PrototypeSet>, PipelineError> {
        if let Some(p) = &self.protos {
            return Ok(p.clone());
        }
        let mut zs = Vec::new();
        let mut labels = Vec::new();
        for (_, p) in bundled_programs() {
            let src = minilang::pretty(&p);
            zs.push(self.adapter.embed(&src)?);
            labels.push(self.adapter.classify(&src)?.argmax());
        }
        let protos = Arc::new(fit_prototypes(&zs, &labels).map_err(metric_err(MetricKind::Repr))?);
        self.protos = Some(protos.clone());
        Ok(protos)
    }

    fn class_prediction(&self, p: &ProbVector) -> Prediction {
        let label = p.argmax();
        Prediction::Class {
            label,
            name: self.caps.labels.get(label).cloned(),
            probs: p.probs().to_vec(),
        }
    }

    /// One classification metric for `source`, whose prediction is `p`.
    pub fn class_metric(
        &mut self,
        kind: MetricKind,
        source: &str,
        p: &ProbVector,
    ) -> Result<MetricValue, PipelineError> {
        let err = metric_err(kind);
        let passes = |a: &mut dyn Adapter, tag: &str, n: usize, seed: u64| -> Result<Vec<ProbVector>, PipelineError> {
            let base = sub_seed(seed, tag);
            (0..n as u64)
                .map(|i| Ok(a.classify_stochastic(source, base.wrapping_add(i))?))
                .collect()
        };
        Ok(match kind {
            MetricKind::Vanilla => vanilla_confidence(p).map_err(err)?,
            MetricKind::Entropy => entropy(p).map_err(err)?,
            MetricKind::Mcd => {
                mcd_variance(&passes(&mut *self.adapter, "mcd", self.cfg.passes, self.seed)?).map_err(err)?
            }
            MetricKind::Ensemble => {
                let members = passes(&mut *self.adapter, "ensemble", self.cfg.ensemble_size, self.seed)?;
                ensemble_variance(&members).map_err(err)?
            }
            MetricKind::Repr => {
                let protos = self.prototypes()?;
                repr_distance(&self.adapter.embed(source)?, &protos).map_err(err)?
            }
            MetricKind::Constant => constant(),
            other => return Err(PipelineError::Config(format!("{other} is not a classification metric"))),
        })
    }

    pub fn classify(&mut self, source: &str) -> Result<Assessment, PipelineError> {
        let p = self.adapter.classify(source)?;
        let mut values = Vec::new();
        for kind in self.cfg.kinds() {
            values.push(self.class_metric(kind, source, &p)?);
        }
        let mut validity = combine_v(&values, &self.cfg)?;
        validity.provenance = self.provenance(source);
        Ok(Assessment {
            prediction: self.class_prediction(&p),
            validity,
        })
    }

    /// The validator restricted to metrics computable from an embedding;
    /// plain entropy when none of those is enabled.
    pub fn latent_config(&self) -> ValidatorConfig {
        let metrics: Vec<WeightedMetric> = self
            .cfg
            .metrics
            .iter()
            .copied()
            .filter(|m| matches!(m.kind, MetricKind::Vanilla | MetricKind::Entropy | MetricKind::Repr))
            .filter(|m| m.weight > 0.0)
            .collect();
        let metrics = if metrics.is_empty() {
            vec![WeightedMetric {
                kind: MetricKind::Entropy,
                weight: 1.0,
            }]
        } else {
            metrics
        };
        ValidatorConfig {
            metrics,
            ..self.cfg.clone()
        }
        .normalized()
    }

    /// Assessment of the prediction the adapter makes from embedding `z`.
    pub fn classify_latent(&mut self, z: &[f64], source: &str) -> Result<Assessment, PipelineError> {
        let cfg = self.latent_config();
        let p = self.adapter.classify_embedding(z)?;
        let mut values = Vec::new();
        for kind in cfg.kinds() {
            let err = metric_err(kind);
            values.push(match kind {
                MetricKind::Vanilla => vanilla_confidence(&p).map_err(err)?,
                MetricKind::Entropy => entropy(&p).map_err(err)?,
                _ => {
                    let protos = self.prototypes()?;
                    repr_distance(z, &protos).map_err(err)?
                }
            });
        }
        let mut validity = combine_v(&values, &cfg)?;
        validity.provenance = self.provenance(source);
        Ok(Assessment {
            prediction: self.class_prediction(&p),
            validity,
        })
    }

    fn samples(&mut self, ctx: &mut GenContext) -> Result<Vec<GenerationResult>, PipelineError> {
        if ctx.samples.is_none() {
            let c = &self.cfg;
            let s = self.adapter.sample(
                &ctx.prompt,
                c.samples,
                c.temperature,
                sub_seed(self.seed, "sample"),
                c.max_len,
            )?;
            ctx.samples = Some(s);
        }
        Ok(ctx.samples.clone().unwrap())
    }

    /// Greedy outputs for `perturbations - 1` perturbed prompts.
    fn perturbed(&mut self, ctx: &mut GenContext) -> Result<Vec<GenerationResult>, PipelineError> {
        if ctx.perturbed.is_none() {
            let prompt = PromptText::new(&ctx.prompt);
            let sites = enumerate_prompt_sites(&prompt, &self.dict);
            if sites.is_empty() {
                return Err(PipelineError::Metric {
                    kind: MetricKind::PromptConsistency,
                    source: MetricError::DegenerateInput("prompt admits no perturbation".into()),
                });
            }
            let base = sub_seed(self.seed, "perturb");
            let mut out = Vec::new();
            for k in 1..self.cfg.perturbations {
                let site = &sites[(k - 1) % sites.len()];
                let text = nl_perturb(&prompt, site.kind, base.wrapping_add(k as u64), &self.dict)?.text();
                out.push(self.adapter.generate(&text, self.cfg.max_len)?);
            }
            ctx.perturbed = Some(out);
        }
        Ok(ctx.perturbed.clone().unwrap())
    }

    /// One generation metric for output `g` of the prompt in `ctx`.
    pub fn gen_metric(
        &mut self,
        kind: MetricKind,
        g: &GenerationResult,
        ctx: &mut GenContext,
    ) -> Result<MetricValue, PipelineError> {
        let err = metric_err(kind);
        let probe = self.cfg.probe.clone();
        Ok(match kind {
            MetricKind::Perplexity => perplexity(g).map_err(err)?,
            MetricKind::TokenEntropy => mean_token_entropy(g).map_err(err)?,
            MetricKind::Traj => traj_signal(g, self.cfg.traj).map_err(err)?,
            MetricKind::Mcse => semantic_entropy(&self.samples(ctx)?, &probe).map_err(err)?,
            MetricKind::BbLabProb => bb_lab_prob(g, &self.samples(ctx)?, &probe).map_err(err)?,
            MetricKind::PromptConsistency => {
                let mut outs = vec![g.clone()];
                outs.extend(self.perturbed(ctx)?);
                prompt_consistency(&outs, &probe).map_err(err)?
            }
            MetricKind::Constant => constant(),
            other => return Err(PipelineError::Config(format!("{other} is not a generation metric"))),
        })
    }

    /// Assesses output `g` as the answer to the prompt in `ctx`.
    pub fn assess_output(&mut self, g: &GenerationResult, ctx: &mut GenContext) -> Result<Assessment, PipelineError> {
        let mut values = Vec::new();
        for kind in self.cfg.kinds() {
            values.push(self.gen_metric(kind, g, ctx)?);
        }
        let mut validity = combine_v(&values, &self.cfg)?;
        validity.provenance = self.provenance(&ctx.prompt);
        Ok(Assessment {
            prediction: Prediction::Generation {
                text: g.text(),
                complete: g.complete,
                mean_logprob: g.mean_logprob(),
            },
            validity,
        })
    }

    pub fn generate(&mut self, prompt: &str) -> Result<(Assessment, GenContext), PipelineError> {
        let g = self.adapter.generate(prompt, self.cfg.max_len)?;
        let mut ctx = GenContext::for_prompt(prompt);
        let a = self.assess_output(&g, &mut ctx)?;
        Ok((a, ctx))
    }

    pub fn assess(&mut self, payload: &Payload) -> Result<(Assessment, Option<GenContext>), PipelineError> {
        match (self.task, payload) {
            (Task::Classification, Payload::Code(_)) => Ok((self.classify(&payload.text())?, None)),
            (Task::Generation, Payload::Prompt(_)) => {
                let (a, ctx) = self.generate(&payload.text())?;
                Ok((a, Some(ctx)))
            }
            _ => Err(PipelineError::Input("input kind does not match the task".into())),
        }
    }

    /// Forced decoding prefix for a prompt: its own tokens when it is a
    /// viable program prefix within the vocabulary, otherwise
    /// `fn <name> (` with the first prompt word found in the vocabulary.
    pub fn prompt_prefix(&self, prompt: &str) -> Vec<String> {
        let vocab = &self.caps.vocab;
        if let Ok(toks) = lex(prompt) {
            if prefix_viable(&toks) && toks.iter().all(|t| vocab.contains(&t.text)) {
                return toks.into_iter().map(|t| t.text).collect();
            }
        }
        let name = prompt
            .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .find(|w| minilang::is_identifier(w) && !TokenKind::is_keyword(w) && vocab.iter().any(|v| v == w))
            .unwrap_or("main");
        vec!["fn".into(), name.into(), "(".into()]
    }
}
