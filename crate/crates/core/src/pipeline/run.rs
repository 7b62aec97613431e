use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use minilang::parse;
use serde::{Deserialize, Serialize};

use super::assess::{Assessment, Assessor, GenContext};
use super::{digest, sub_seed, PipelineConfig, PipelineError, Strategy, Task};
use crate::adapters::Adapter;
use crate::latent::{distance, perturb_latent, LatentConfig};
use crate::search::{evolve, revise_decode, Payload, SearchConfig};
use crate::transforms::{Applied, PromptText, SynonymDict};
use crate::validator::Decision;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptStatus {
    Improved,
    NoGain,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attempt {
    pub round: usize,
    pub strategy: Strategy,
    pub status: AttemptStatus,
    /// Validity of the strategy's best variant, when it ran.
    pub v: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentShift {
    pub distance: f64,
    pub evals: usize,
    pub f0: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Adaptation {
    /// Strategy that produced the final answer; `None` when no variant beat
    /// the original.
    pub strategy: Option<Strategy>,
    pub lineage: Vec<Applied>,
    /// The transformed input, when it differs from the original.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<LatentShift>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revisions: Option<usize>,
    #[serde(rename = "final")]
    pub final_: Assessment,
    pub attempts: Vec<Attempt>,
}

/// Wall-clock milliseconds per phase; excluded from determinism checks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    pub validate_ms: f64,
    pub adapt_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub input_digest: String,
    pub config_digest: String,
    pub seed: u64,
    pub adapter: String,
    pub task: Task,
    pub original: Assessment,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptation: Option<Adaptation>,
    pub timing: Timing,
}

impl RunReport {
    /// The answer the pipeline stands behind.
    pub fn final_assessment(&self) -> &Assessment {
        self.adaptation.as_ref().map_or(&self.original, |a| &a.final_)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }

    /// The record without its timing field.
    pub fn stable_line(&self) -> String {
        let mut v = serde_json::to_value(self).expect("reports serialize");
        v.as_object_mut().unwrap().remove("timing");
        v.to_string()
    }

    pub fn append_to(&self, path: &Path) -> Result<(), PipelineError> {
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        writeln!(f, "{}", self.to_line())?;
        Ok(())
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// The best answer found so far and how it was reached.
struct Variant {
    assessment: Assessment,
    payload: Payload,
    ctx: Option<GenContext>,
    strategy: Option<Strategy>,
    lineage: Vec<Applied>,
    latent: Option<LatentShift>,
    revisions: Option<usize>,
}

pub fn input_payload(input: &str, task: Task) -> Result<Payload, PipelineError> {
    match task {
        Task::Classification => parse(input)
            .map(Payload::Code)
            .map_err(|e| PipelineError::Input(e.to_string())),
        Task::Generation => {
            if input.trim().is_empty() {
                return Err(PipelineError::Input("empty prompt".into()));
            }
            Ok(Payload::Prompt(PromptText::new(input)))
        }
    }
}

/// Infer, validate, and when validity is below threshold adapt and
/// re-infer. Strategies run in the configured order, each from the best
/// variant so far, and stop once validity reaches the threshold. The
/// variant with the highest validity wins; the original is kept unless a
/// variant strictly beats it.
pub fn run_pipeline(input: &str, cfg: &PipelineConfig, adapter: &mut dyn Adapter) -> Result<RunReport, PipelineError> {
    cfg.validate()?;
    let start = Instant::now();
    let payload = input_payload(input, cfg.task)?;
    let mut a = Assessor::new(adapter, cfg.validator(), cfg.seed, cfg.task)?;
    let (original, ctx) = a.assess(&payload)?;
    let validate_ms = ms(start);
    let threshold = original.validity.threshold;
    let decision = original.validity.decision;

    let mut report = RunReport {
        input_digest: digest(input.as_bytes()),
        config_digest: cfg.digest(),
        seed: cfg.seed,
        adapter: a.adapter().id(),
        task: cfg.task,
        original: original.clone(),
        decision,
        adaptation: None,
        timing: Timing::default(),
    };
    if decision == Decision::Keep {
        report.timing = Timing {
            validate_ms,
            adapt_ms: 0.0,
            total_ms: ms(start),
        };
        return Ok(report);
    }

    let adapt_start = Instant::now();
    let dict = SynonymDict::builtin();
    let mut best = Variant {
        assessment: original,
        payload,
        ctx,
        strategy: None,
        lineage: Vec::new(),
        latent: None,
        revisions: None,
    };
    let mut attempts = Vec::new();
    'rounds: for round in 0..cfg.rounds() {
        for strategy in cfg.strategy_order() {
            if best.assessment.v() >= threshold {
                break 'rounds;
            }
            let attempt = match strategy {
                Strategy::Search => try_search(&mut a, &mut best, cfg, round, &dict)?,
                Strategy::Latent => try_latent(&mut a, &mut best, cfg, round)?,
                Strategy::Decode => try_decode(&mut a, &mut best, cfg)?,
            };
            attempts.push(Attempt {
                round,
                strategy,
                ..attempt
            });
        }
    }

    let changed = best.payload.text() != input_payload(input, cfg.task)?.text();
    report.adaptation = Some(Adaptation {
        strategy: best.strategy,
        lineage: best.lineage,
        input: changed.then(|| best.payload.text()),
        latent: best.latent,
        revisions: best.revisions,
        final_: best.assessment,
        attempts,
    });
    report.timing = Timing {
        validate_ms,
        adapt_ms: ms(adapt_start),
        total_ms: ms(start),
    };
    Ok(report)
}

fn attempt(status: AttemptStatus, v: Option<f64>, detail: impl Into<String>) -> Attempt {
    Attempt {
        round: 0,
        strategy: Strategy::Search,
        status,
        v,
        detail: detail.into(),
    }
}

fn status(v: f64, best: f64) -> AttemptStatus {
    if v > best {
        AttemptStatus::Improved
    } else {
        AttemptStatus::NoGain
    }
}

fn try_search(
    a: &mut Assessor,
    best: &mut Variant,
    cfg: &PipelineConfig,
    round: usize,
    dict: &SynonymDict,
) -> Result<Attempt, PipelineError> {
    let scfg = SearchConfig {
        seed: sub_seed(cfg.seed ^ cfg.search.seed, "search").wrapping_add(round as u64),
        ..cfg.search.clone()
    };
    let out = evolve(
        &best.payload,
        |p| a.assess(p).map(|(x, _)| x.v()).map_err(|e| e.to_string()),
        &scfg,
        dict,
    )?;
    if out.no_applicable_transforms {
        return Ok(attempt(AttemptStatus::NoGain, None, "no applicable transforms"));
    }
    let (assessment, ctx) = a.assess(&out.best.payload)?;
    let v = assessment.v();
    let st = status(v, best.assessment.v());
    let detail = format!("{} evaluations", out.evaluations);
    if st == AttemptStatus::Improved {
        let mut lineage = std::mem::take(&mut best.lineage);
        lineage.extend(out.best.lineage);
        *best = Variant {
            assessment,
            payload: out.best.payload,
            ctx,
            strategy: Some(Strategy::Search),
            lineage,
            latent: None,
            revisions: None,
        };
    }
    Ok(attempt(st, Some(v), detail))
}

fn try_latent(
    a: &mut Assessor,
    best: &mut Variant,
    cfg: &PipelineConfig,
    round: usize,
) -> Result<Attempt, PipelineError> {
    let f = a.capabilities().flags;
    if !(f.embed && f.classify_embedding) {
        return Ok(attempt(
            AttemptStatus::Skipped,
            None,
            "adapter lacks embed or classify_embedding",
        ));
    }
    let source = best.payload.text();
    let lcfg = LatentConfig {
        seed: sub_seed(cfg.seed ^ cfg.latent.seed, "latent").wrapping_add(round as u64),
        ..cfg.latent.clone()
    };
    let z0 = a.adapter().embed(&source)?;
    let out = perturb_latent(&z0, |z| a.classify_latent(z, &source).map(|x| x.v()), &lcfg)??;
    let assessment = a.classify_latent(&out.z, &source)?;
    let v = assessment.v();
    let st = status(v, best.assessment.v());
    let detail = format!("{} evaluations", out.evals);
    if st == AttemptStatus::Improved {
        best.assessment = assessment;
        best.strategy = Some(Strategy::Latent);
        best.revisions = None;
        best.latent = Some(LatentShift {
            distance: distance(&out.z, &z0),
            evals: out.evals,
            f0: out.f0,
            f: out.f,
        });
    }
    Ok(attempt(st, Some(v), detail))
}

fn try_decode(a: &mut Assessor, best: &mut Variant, cfg: &PipelineConfig) -> Result<Attempt, PipelineError> {
    if !a.capabilities().flags.step {
        return Ok(attempt(AttemptStatus::Skipped, None, "adapter lacks step"));
    }
    let prompt = best.payload.text();
    let prefix = a.prompt_prefix(&prompt);
    let max_len = a.config().max_len;
    let (g, revisions) = revise_decode(a.adapter(), &prefix, cfg.decode, max_len)?;
    let mut ctx = match best.ctx.take() {
        Some(c) => c,
        None => a.assess(&best.payload)?.1.expect("generation context"),
    };
    let assessment = a.assess_output(&g, &mut ctx);
    best.ctx = Some(ctx);
    let assessment = assessment?;
    let v = assessment.v();
    let st = status(v, best.assessment.v());
    if st == AttemptStatus::Improved {
        best.assessment = assessment;
        best.strategy = Some(Strategy::Decode);
        best.latent = None;
        best.revisions = Some(revisions);
    }
    Ok(attempt(st, Some(v), format!("{revisions} revisions")))
}
