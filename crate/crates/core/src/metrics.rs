//! Uncertainty signals. Every metric reports `u` in `[0, 1]`, where higher
//! means a misprediction is more likely. Logarithms are natural.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use minilang::{interpret, parse, Outcome, Program};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::arg_vectors;

const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("prototypes coincide")]
    DegenerateGeometry,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("missing capability: {0}")]
    MissingCapability(String),
    #[error("invalid probability vector: {0}")]
    InvalidProbVector(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
}

fn degenerate(msg: impl Into<String>) -> MetricError {
    MetricError::DegenerateInput(msg.into())
}

/// Class probabilities, validated on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(probs: Vec<f64>) -> Result<Self, MetricError> {
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(MetricError::InvalidProbVector(format!("entry {p} outside [0,1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(MetricError::InvalidProbVector(format!("sums to {sum}")));
        }
        Ok(ProbVector(probs))
    }

    /// Numerically stable softmax.
    pub fn softmax(logits: &[f64]) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        ProbVector(exps.into_iter().map(|e| e / total).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest probability; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.0.iter().enumerate() {
            if *p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = MetricError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        ProbVector::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Self {
        p.0
    }
}

/// A generated token sequence with its natural-log probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub tokens: Vec<String>,
    pub logprobs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_dists: Option<Vec<Vec<f64>>>,
    /// False when decoding stopped at the length limit.
    #[serde(default = "yes")]
    pub complete: bool,
}

fn yes() -> bool {
    true
}

impl GenerationResult {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn mean_logprob(&self) -> Option<f64> {
        if self.logprobs.is_empty() {
            None
        } else {
            Some(self.logprobs.iter().sum::<f64>() / self.logprobs.len() as f64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Vanilla,
    Entropy,
    Mcd,
    Ensemble,
    Repr,
    Perplexity,
    TokenEntropy,
    Mcse,
    BbLabProb,
    Traj,
    PromptConsistency,
    /// Always 0.5; a baseline that cannot rank anything.
    Constant,
}

impl MetricKind {
    pub const ALL: [MetricKind; 12] = [
        MetricKind::Vanilla,
        MetricKind::Entropy,
        MetricKind::Mcd,
        MetricKind::Ensemble,
        MetricKind::Repr,
        MetricKind::Perplexity,
        MetricKind::TokenEntropy,
        MetricKind::Mcse,
        MetricKind::BbLabProb,
        MetricKind::Traj,
        MetricKind::PromptConsistency,
        MetricKind::Constant,
    ];

    pub fn id(self) -> &'static str {
        match self {
            MetricKind::Vanilla => "vanilla",
            MetricKind::Entropy => "entropy",
            MetricKind::Mcd => "mcd",
            MetricKind::Ensemble => "ensemble",
            MetricKind::Repr => "repr",
            MetricKind::Perplexity => "perplexity",
            MetricKind::TokenEntropy => "token_entropy",
            MetricKind::Mcse => "mcse",
            MetricKind::BbLabProb => "bb_lab_prob",
            MetricKind::Traj => "traj",
            MetricKind::PromptConsistency => "prompt_consistency",
            MetricKind::Constant => "constant",
        }
    }

    /// Row label used in rendered tables.
    pub fn label(self) -> &'static str {
        match self {
            MetricKind::Vanilla => "Vanilla",
            MetricKind::Entropy | MetricKind::TokenEntropy => "Entropy",
            MetricKind::Mcd => "MCD",
            MetricKind::Ensemble => "Ensemble",
            MetricKind::Repr => "Repr-distance",
            MetricKind::Perplexity => "Perplexity",
            MetricKind::Mcse => "MCSE",
            MetricKind::BbLabProb => "BBLabprob",
            MetricKind::Traj => "Trajectory",
            MetricKind::PromptConsistency => "Prompt-consistency",
            MetricKind::Constant => "Constant",
        }
    }

    pub fn is_classification(self) -> bool {
        matches!(
            self,
            MetricKind::Vanilla
                | MetricKind::Entropy
                | MetricKind::Mcd
                | MetricKind::Ensemble
                | MetricKind::Repr
                | MetricKind::Constant
        )
    }

    pub fn is_generation(self) -> bool {
        !self.is_classification() || self == MetricKind::Constant
    }

    /// Single-pass metrics that need nothing beyond one prediction.
    pub fn is_single_pass(self) -> bool {
        matches!(
            self,
            MetricKind::Vanilla
                | MetricKind::Entropy
                | MetricKind::Perplexity
                | MetricKind::TokenEntropy
                | MetricKind::Traj
                | MetricKind::Constant
        )
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for MetricKind {
    type Err = MetricError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricKind::ALL
            .into_iter()
            .find(|k| k.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| MetricError::UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub kind: MetricKind,
    pub u: f64,
    pub raw: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aux: Vec<f64>,
}

impl MetricValue {
    fn new(kind: MetricKind, u: f64, raw: f64) -> Self {
        MetricValue {
            kind,
            u: u.clamp(0.0, 1.0),
            raw,
            aux: Vec::new(),
        }
    }

    fn with_aux(mut self, aux: Vec<f64>) -> Self {
        self.aux = aux;
        self
    }
}

fn shannon(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

fn need_classes(p: &ProbVector) -> Result<(), MetricError> {
    if p.len() < 2 {
        return Err(degenerate("fewer than two classes"));
    }
    Ok(())
}

pub fn vanilla_confidence(p: &ProbVector) -> Result<MetricValue, MetricError> {
    need_classes(p)?;
    let raw = p.probs().iter().copied().fold(0.0, f64::max);
    Ok(MetricValue::new(MetricKind::Vanilla, 1.0 - raw, raw))
}

pub fn entropy(p: &ProbVector) -> Result<MetricValue, MetricError> {
    need_classes(p)?;
    let raw = shannon(p.probs());
    Ok(MetricValue::new(MetricKind::Entropy, raw / (p.len() as f64).ln(), raw))
}

fn variance_across(kind: MetricKind, passes: &[ProbVector]) -> Result<MetricValue, MetricError> {
    if passes.len() < 2 {
        return Err(degenerate("fewer than two passes"));
    }
    let k = passes[0].len();
    if let Some(bad) = passes.iter().find(|p| p.len() != k) {
        return Err(MetricError::DimensionMismatch {
            expected: k,
            found: bad.len(),
        });
    }
    let n = passes.len() as f64;
    let per_class: Vec<f64> = (0..k)
        .map(|c| {
            let mean = passes.iter().map(|p| p.probs()[c]).sum::<f64>() / n;
            passes.iter().map(|p| (p.probs()[c] - mean).powi(2)).sum::<f64>() / n
        })
        .collect();
    let raw = per_class.iter().sum::<f64>() / k as f64;
    Ok(MetricValue::new(kind, (4.0 * raw).min(1.0), raw).with_aux(per_class))
}

/// Mean per-class population variance across stochastic passes.
pub fn mcd_variance(passes: &[ProbVector]) -> Result<MetricValue, MetricError> {
    variance_across(MetricKind::Mcd, passes)
}

/// Same aggregator as [`mcd_variance`], over distinct ensemble members.
pub fn ensemble_variance(members: &[ProbVector]) -> Result<MetricValue, MetricError> {
    variance_across(MetricKind::Ensemble, members)
}

pub fn constant() -> MetricValue {
    MetricValue::new(MetricKind::Constant, 0.5, 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeSet {
    pub means: Vec<Vec<f64>>,
    pub scale: f64,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Class means and the median pairwise distance between them. Classes are
/// `0..=max(labels)` and each must be non-empty.
pub fn fit_prototypes(embeddings: &[Vec<f64>], labels: &[usize]) -> Result<PrototypeSet, MetricError> {
    if embeddings.len() != labels.len() || embeddings.is_empty() {
        return Err(degenerate("embeddings and labels differ in length or are empty"));
    }
    let dim = embeddings[0].len();
    if let Some(e) = embeddings.iter().find(|e| e.len() != dim) {
        return Err(MetricError::DimensionMismatch {
            expected: dim,
            found: e.len(),
        });
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    if classes < 2 {
        return Err(degenerate("fewer than two classes"));
    }
    let mut sums = vec![vec![0.0; dim]; classes];
    let mut counts = vec![0usize; classes];
    for (e, &l) in embeddings.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(e) {
            *s += x;
        }
    }
    if let Some(c) = counts.iter().position(|&c| c == 0) {
        return Err(degenerate(format!("class {c} has no embeddings")));
    }
    let means: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| s.into_iter().map(|x| x / c as f64).collect())
        .collect();
    let mut pair: Vec<f64> = Vec::new();
    for i in 0..classes {
        for j in i + 1..classes {
            pair.push(dist(&means[i], &means[j]));
        }
    }
    pair.sort_by(f64::total_cmp);
    let m = pair.len();
    let scale = if m % 2 == 1 {
        pair[m / 2]
    } else {
        (pair[m / 2 - 1] + pair[m / 2]) / 2.0
    };
    if scale <= 0.0 {
        return Err(MetricError::DegenerateGeometry);
    }
    Ok(PrototypeSet { means, scale })
}

/// Distance to the nearest prototype, in units of the prototype spread.
pub fn repr_distance(z: &[f64], protos: &PrototypeSet) -> Result<MetricValue, MetricError> {
    let dim = protos.means[0].len();
    if z.len() != dim {
        return Err(MetricError::DimensionMismatch {
            expected: dim,
            found: z.len(),
        });
    }
    let dists: Vec<f64> = protos.means.iter().map(|m| dist(z, m)).collect();
    let raw = dists.iter().copied().fold(f64::INFINITY, f64::min) / protos.scale;
    Ok(MetricValue::new(MetricKind::Repr, raw.min(1.0), raw).with_aux(dists))
}

pub fn perplexity(g: &GenerationResult) -> Result<MetricValue, MetricError> {
    let mean = g.mean_logprob().ok_or_else(|| degenerate("empty generation"))?;
    Ok(MetricValue::new(
        MetricKind::Perplexity,
        1.0 - mean.exp(),
        (-mean).exp(),
    ))
}

pub fn mean_token_entropy(g: &GenerationResult) -> Result<MetricValue, MetricError> {
    let steps = g
        .step_dists
        .as_ref()
        .ok_or_else(|| MetricError::MissingCapability("step distributions".into()))?;
    if steps.is_empty() {
        return Err(degenerate("empty generation"));
    }
    let vocab = steps[0].len();
    if vocab < 2 {
        return Err(degenerate("vocabulary smaller than two"));
    }
    let per_step: Vec<f64> = steps.iter().map(|d| shannon(d)).collect();
    let raw = per_step.iter().sum::<f64>() / per_step.len() as f64;
    Ok(MetricValue::new(MetricKind::TokenEntropy, raw / (vocab as f64).ln(), raw).with_aux(per_step))
}

/// How generations are grouped into semantic clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterProbe {
    pub vectors: usize,
    pub seed: u64,
    pub fuel: u64,
}

impl Default for ClusterProbe {
    fn default() -> Self {
        ClusterProbe {
            vectors: 10,
            seed: 0,
            fuel: 100_000,
        }
    }
}

/// Equivalence-class key of one generation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SemanticKey {
    /// Entry arity and outcomes on the probe vectors.
    Exec(usize, Vec<Outcome>),
    /// Whitespace-normalized text, for output that does not parse.
    Text(String),
}

/// Entry function of a generated program: `main` when present, else the
/// last function.
pub fn entry_of(p: &Program) -> &str {
    match p.function("main") {
        Some(f) => &f.name,
        None => &p.functions.last().expect("programs are non-empty").name,
    }
}

/// Token texts joined by single spaces when the text lexes, otherwise
/// whitespace runs collapsed.
fn normalize_text(text: &str) -> String {
    match minilang::lex(text) {
        Ok(toks) => toks.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" "),
        Err(_) => text.split_whitespace().collect::<Vec<_>>().join(" "),
    }
}

impl ClusterProbe {
    pub fn key_of_text(&self, text: &str) -> SemanticKey {
        match parse(text) {
            Ok(p) => {
                let entry = entry_of(&p);
                let arity = p.function(entry).unwrap().params.len();
                let outcomes = arg_vectors(arity, self.seed, self.vectors, 0.0)
                    .iter()
                    .map(|args| interpret(&p, entry, args, self.fuel))
                    .collect();
                SemanticKey::Exec(arity, outcomes)
            }
            Err(_) => SemanticKey::Text(normalize_text(text)),
        }
    }

    pub fn key(&self, g: &GenerationResult) -> SemanticKey {
        self.key_of_text(&g.text())
    }
}

/// Entropy over semantic clusters of `samples`, normalized by `ln N`.
pub fn semantic_entropy(samples: &[GenerationResult], probe: &ClusterProbe) -> Result<MetricValue, MetricError> {
    if samples.len() < 2 {
        return Err(degenerate("fewer than two samples"));
    }
    let mut clusters: BTreeMap<SemanticKey, usize> = BTreeMap::new();
    for s in samples {
        *clusters.entry(probe.key(s)).or_default() += 1;
    }
    let n = samples.len() as f64;
    let p: Vec<f64> = clusters.values().map(|&c| c as f64 / n).collect();
    let raw = shannon(&p);
    let sizes = clusters.values().map(|&c| c as f64).collect();
    Ok(MetricValue::new(MetricKind::Mcse, raw / n.ln(), raw).with_aux(sizes))
}

/// One minus the fraction of samples equivalent to the greedy output.
pub fn bb_lab_prob(
    greedy: &GenerationResult,
    samples: &[GenerationResult],
    probe: &ClusterProbe,
) -> Result<MetricValue, MetricError> {
    if samples.is_empty() {
        return Err(degenerate("no samples"));
    }
    let g = probe.key(greedy);
    let agree = samples.iter().filter(|s| probe.key(s) == g).count();
    let raw = agree as f64 / samples.len() as f64;
    Ok(MetricValue::new(MetricKind::BbLabProb, 1.0 - raw, raw))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajCaps {
    pub drop_cap: f64,
    pub disp_cap: f64,
}

impl Default for TrajCaps {
    fn default() -> Self {
        TrajCaps {
            drop_cap: 10.0,
            disp_cap: 5.0,
        }
    }
}

/// Largest log-likelihood drop between consecutive tokens, or logprob
/// dispersion, whichever is larger relative to its cap.
pub fn traj_signal(g: &GenerationResult, caps: TrajCaps) -> Result<MetricValue, MetricError> {
    let lp = &g.logprobs;
    if lp.len() < 2 {
        return Err(degenerate("fewer than two tokens"));
    }
    let drop = lp.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    let mean = lp.iter().sum::<f64>() / lp.len() as f64;
    let disp = (lp.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / lp.len() as f64).sqrt();
    let u = (drop / caps.drop_cap).max(disp / caps.disp_cap).min(1.0);
    Ok(MetricValue::new(MetricKind::Traj, u, drop).with_aux(vec![drop, disp]))
}

/// Pairwise agreement of outputs generated for perturbed prompts.
pub fn prompt_consistency(outputs: &[GenerationResult], probe: &ClusterProbe) -> Result<MetricValue, MetricError> {
    let m = outputs.len();
    if m < 2 {
        return Err(degenerate("fewer than two perturbations"));
    }
    let keys: Vec<SemanticKey> = outputs.iter().map(|o| probe.key(o)).collect();
    let mut same = 0usize;
    for i in 0..m {
        for j in i + 1..m {
            same += usize::from(keys[i] == keys[j]);
        }
    }
    let raw = same as f64 / (m * (m - 1) / 2) as f64;
    Ok(MetricValue::new(MetricKind::PromptConsistency, 1.0 - raw, raw))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(p: &[f64]) -> ProbVector {
        ProbVector::new(p.to_vec()).unwrap()
    }

    fn gen(lp: &[f64]) -> GenerationResult {
        GenerationResult {
            tokens: lp.iter().map(|_| "x".to_string()).collect(),
            logprobs: lp.to_vec(),
            step_dists: None,
            complete: true,
        }
    }

    fn text(src: &str) -> GenerationResult {
        let tokens: Vec<String> = minilang::lex(src).unwrap().into_iter().map(|t| t.text).collect();
        GenerationResult {
            logprobs: vec![-1.0; tokens.len()],
            tokens,
            step_dists: None,
            complete: true,
        }
    }

    #[test]
    fn vanilla_examples() {
        let v = vanilla_confidence(&pv(&[0.7, 0.3])).unwrap();
        assert!((v.raw - 0.7).abs() < 1e-15 && (v.u - 0.3).abs() < 1e-15);
        assert_eq!(vanilla_confidence(&pv(&[1.0, 0.0, 0.0])).unwrap().u, 0.0);
        assert_eq!(vanilla_confidence(&pv(&[0.25; 4])).unwrap().u, 0.75);
        assert!(vanilla_confidence(&ProbVector::softmax(&[0.0])).is_err());
    }

    #[test]
    fn entropy_examples() {
        let e = entropy(&pv(&[0.25; 4])).unwrap();
        assert!((e.raw - 4f64.ln()).abs() < 1e-12);
        assert!((e.u - 1.0).abs() < 1e-12);
        assert_eq!(entropy(&pv(&[1.0, 0.0])).unwrap().u, 0.0);
        let e = entropy(&pv(&[0.5, 0.5])).unwrap();
        assert!((e.raw - std::f64::consts::LN_2).abs() < 1e-12 && (e.u - 1.0).abs() < 1e-12);
    }

    #[test]
    fn variance_examples() {
        assert_eq!(mcd_variance(&[pv(&[0.6, 0.4]), pv(&[0.6, 0.4])]).unwrap().u, 0.0);
        let m = mcd_variance(&[pv(&[1.0, 0.0]), pv(&[0.0, 1.0])]).unwrap();
        assert_eq!((m.raw, m.u), (0.25, 1.0));
        // per class: mean 0.7 / 0.3, deviations ±0.1, variance 0.01
        let m = ensemble_variance(&[pv(&[0.6, 0.4]), pv(&[0.8, 0.2])]).unwrap();
        assert!((m.raw - 0.01).abs() < 1e-12 && (m.u - 0.04).abs() < 1e-12);
        assert!(mcd_variance(&[pv(&[0.5, 0.5])]).is_err());
    }

    #[test]
    fn prototype_examples() {
        let protos = fit_prototypes(&[vec![0.0, 0.0], vec![0.0, 2.0], vec![4.0, 1.0]], &[0, 0, 1]).unwrap();
        assert_eq!(protos.means, vec![vec![0.0, 1.0], vec![4.0, 1.0]]);
        assert_eq!(protos.scale, 4.0);
        assert_eq!(repr_distance(&[0.0, 1.0], &protos).unwrap().u, 0.0);
        let r = repr_distance(&[2.0, 1.0], &protos).unwrap();
        assert_eq!((r.raw, r.u), (0.5, 0.5));
        assert_eq!(repr_distance(&[40.0, 1.0], &protos).unwrap().u, 1.0);
        assert!(matches!(
            repr_distance(&[1.0], &protos),
            Err(MetricError::DimensionMismatch { .. })
        ));
        let single = fit_prototypes(&[vec![1.0, 2.0], vec![3.0, 5.0]], &[0, 1]).unwrap();
        assert_eq!(single.means, vec![vec![1.0, 2.0], vec![3.0, 5.0]]);
        assert_eq!(
            fit_prototypes(&[vec![1.0], vec![1.0]], &[0, 1]),
            Err(MetricError::DegenerateGeometry)
        );
        assert!(fit_prototypes(&[vec![1.0], vec![1.0]], &[0, 2]).is_err());
    }

    #[test]
    fn perplexity_examples() {
        let l2 = 2f64.ln();
        let p = perplexity(&gen(&[-l2, -l2])).unwrap();
        assert!((p.raw - 2.0).abs() < 1e-12 && (p.u - 0.5).abs() < 1e-12);
        let p = perplexity(&gen(&[0.0, 0.0, 0.0])).unwrap();
        assert_eq!((p.raw, p.u), (1.0, 0.0));
        let p = perplexity(&gen(&[-1.0, -3.0])).unwrap();
        assert!((p.raw - 2f64.exp()).abs() < 1e-12);
        assert!((p.u - 0.8647).abs() < 1e-4);
        assert!(perplexity(&gen(&[])).is_err());
    }

    #[test]
    fn token_entropy_examples() {
        let mut g = gen(&[0.0, 0.0]);
        assert!(matches!(mean_token_entropy(&g), Err(MetricError::MissingCapability(_))));
        g.step_dists = Some(vec![vec![0.25; 4], vec![1.0, 0.0, 0.0, 0.0]]);
        assert!((mean_token_entropy(&g).unwrap().u - 0.5).abs() < 1e-12);
        g.step_dists = Some(vec![vec![0.0, 1.0, 0.0, 0.0]; 2]);
        assert_eq!(mean_token_entropy(&g).unwrap().u, 0.0);
        g.step_dists = Some(vec![vec![0.25; 4]; 2]);
        assert!((mean_token_entropy(&g).unwrap().u - 1.0).abs() < 1e-12);
    }

    #[test]
    fn semantic_clustering() {
        let probe = ClusterProbe::default();
        let same = vec![text("fn main(a) { return a; }"); 4];
        assert_eq!(semantic_entropy(&same, &probe).unwrap().u, 0.0);
        let distinct: Vec<_> = (1..=4).map(|i| text(&format!("fn main() {{ return {i}; }}"))).collect();
        let s = semantic_entropy(&distinct, &probe).unwrap();
        assert!((s.raw - 4f64.ln()).abs() < 1e-12 && (s.u - 1.0).abs() < 1e-12);
        assert_eq!(
            probe.key(&text("fn main() { return 1 + 1; }")),
            probe.key(&text("fn main() { return 2; }"))
        );
        assert_ne!(probe.key(&text("fn main( x")), probe.key(&text("fn main( y")));
        assert_eq!(probe.key(&text("fn main( x")), probe.key_of_text("fn   main(\tx"));
        assert!(semantic_entropy(&same[..1], &probe).is_err());
    }

    #[test]
    fn bb_lab_prob_examples() {
        let probe = ClusterProbe::default();
        let g = text("fn main() { return 2; }");
        let other = text("fn main() { return 3; }");
        let three = vec![g.clone(), text("fn main() { return 1 + 1; }"), g.clone(), other.clone()];
        assert!((bb_lab_prob(&g, &three, &probe).unwrap().u - 0.25).abs() < 1e-12);
        assert_eq!(bb_lab_prob(&g, &[g.clone(), g.clone()], &probe).unwrap().u, 0.0);
        assert_eq!(bb_lab_prob(&g, std::slice::from_ref(&other), &probe).unwrap().u, 1.0);
        assert!(bb_lab_prob(&g, &[], &probe).is_err());
    }

    #[test]
    fn traj_examples() {
        let caps = TrajCaps::default();
        let t = traj_signal(&gen(&[-0.1, -0.2, -3.0]), caps).unwrap();
        assert!((t.raw - 2.8).abs() < 1e-12 && t.u >= 0.28 - 1e-12);
        let t = traj_signal(&gen(&[-1.5; 5]), caps).unwrap();
        assert_eq!(t.u, 0.0);
        assert_eq!(traj_signal(&gen(&[-0.1, -20.0]), caps).unwrap().u, 1.0);
        assert!(traj_signal(&gen(&[-0.1]), caps).is_err());
    }

    #[test]
    fn prompt_consistency_examples() {
        let probe = ClusterProbe::default();
        let a = text("fn main() { return 2; }");
        let b = text("fn main() { return 3; }");
        let c = text("fn main() { return 4; }");
        assert_eq!(
            prompt_consistency(&[a.clone(), a.clone(), a.clone()], &probe)
                .unwrap()
                .u,
            0.0
        );
        assert_eq!(prompt_consistency(&[a.clone(), b.clone(), c], &probe).unwrap().u, 1.0);
        let u = prompt_consistency(&[a.clone(), a, b], &probe).unwrap().u;
        assert!((u - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![-0.1, 1.1]).is_err());
        let s = ProbVector::softmax(&[1000.0, 0.0]);
        assert_eq!(s.argmax(), 0);
        let json = serde_json::to_string(&pv(&[0.25, 0.75])).unwrap();
        assert_eq!(json, "[0.25,0.75]");
        assert!(serde_json::from_str::<ProbVector>("[0.5,0.6]").is_err());
    }
}
