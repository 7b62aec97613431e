//! Evolutionary search over transform lineages, and constrained decoding.

mod decode;

use std::cmp::Ordering;
use std::collections::HashMap;

use minilang::{pretty, Program};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::AdapterError;
use crate::transforms::{
    apply_transform, enumerate_applicable, enumerate_prompt_sites, nl_perturb, Applied, PromptText, SynonymDict,
    TransformError, TransformSite,
};

pub use decode::{constrained_decode, revise_decode, DecodeMode, ReviseConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    Config(String),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error("fitness of candidate [{lineage}] failed: {message}")]
    Fitness { lineage: String, message: String },
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("no viable token after `{0}`")]
    NoViableToken(String),
    #[error("prefix `{0}` is not a viable program prefix")]
    BadPrefix(String),
}

/// What a candidate carries: a program or a prompt. Serializes as
/// `{"code": text}` or `{"prompt": text}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Payload {
    Code(Program),
    Prompt(PromptText),
}

impl Serialize for Payload {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(1))?;
        let key = match self {
            Payload::Code(_) => "code",
            Payload::Prompt(_) => "prompt",
        };
        m.serialize_entry(key, &self.text())?;
        m.end()
    }
}

impl Payload {
    /// Canonical text: pretty-printed program or prompt text.
    pub fn text(&self) -> String {
        match self {
            Payload::Code(p) => pretty(p),
            Payload::Prompt(t) => t.text(),
        }
    }

    pub fn sites(&self, dict: &SynonymDict) -> Vec<TransformSite> {
        match self {
            Payload::Code(p) => enumerate_applicable(p),
            Payload::Prompt(t) => enumerate_prompt_sites(t, dict),
        }
    }

    pub fn apply(&self, step: &Applied, dict: &SynonymDict) -> Result<Payload, TransformError> {
        match self {
            Payload::Code(p) => apply_transform(p, &step.site, step.seed).map(Payload::Code),
            Payload::Prompt(t) => {
                if !enumerate_prompt_sites(t, dict).contains(&step.site) {
                    return Err(TransformError::Inapplicable(step.site.clone()));
                }
                nl_perturb(t, step.site.kind, step.seed, dict).map(Payload::Prompt)
            }
        }
    }
}

/// Re-applies `lineage` to `input`.
pub fn replay(input: &Payload, lineage: &[Applied], dict: &SynonymDict) -> Result<Payload, TransformError> {
    lineage.iter().try_fold(input.clone(), |p, step| p.apply(step, dict))
}

pub fn lineage_ids(lineage: &[Applied]) -> Vec<String> {
    lineage.iter().map(|a| format!("{}~{}", a.site, a.seed)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub payload: Payload,
    pub lineage: Vec<Applied>,
    pub fitness: Option<f64>,
}

impl Candidate {
    pub fn original(payload: Payload) -> Self {
        Candidate {
            payload,
            lineage: Vec::new(),
            fitness: None,
        }
    }
}

/// Fitness descending, then shorter lineage, then lineage ids ascending.
pub fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    let fa = a.fitness.unwrap_or(f64::NEG_INFINITY);
    let fb = b.fitness.unwrap_or(f64::NEG_INFINITY);
    fb.total_cmp(&fa)
        .then(a.lineage.len().cmp(&b.lineage.len()))
        .then_with(|| lineage_ids(&a.lineage).cmp(&lineage_ids(&b.lineage)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub population: usize,
    pub generations: usize,
    pub elites: usize,
    pub mutations: usize,
    pub seed: u64,
    /// Maximum number of distinct candidates evaluated.
    pub budget: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            population: 8,
            generations: 5,
            elites: 2,
            mutations: 1,
            seed: 0,
            budget: 64,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if !(self.population >= self.elites && self.elites >= 1) {
            return Err(SearchError::Config(format!(
                "need population >= elites >= 1, got {} and {}",
                self.population, self.elites
            )));
        }
        if self.generations == 0 || self.mutations == 0 || self.budget == 0 {
            return Err(SearchError::Config(
                "generations, mutations and budget must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub size: usize,
    pub best: f64,
    pub mean: f64,
    pub worst: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub best: Candidate,
    pub original_fitness: f64,
    pub history: Vec<GenerationStats>,
    pub evaluations: usize,
    /// The input admitted no transform; `best` is the original.
    pub no_applicable_transforms: bool,
    pub budget_exhausted: bool,
}

struct Evaluator<'a, F> {
    fitness: F,
    cache: HashMap<Payload, f64>,
    budget: usize,
    dict: &'a SynonymDict,
}

impl<F: FnMut(&Payload) -> Result<f64, String>> Evaluator<'_, F> {
    /// `None` once the budget is spent and the payload is not cached.
    fn eval(&mut self, c: &Candidate) -> Result<Option<f64>, SearchError> {
        if let Some(&f) = self.cache.get(&c.payload) {
            return Ok(Some(f));
        }
        if self.cache.len() >= self.budget {
            return Ok(None);
        }
        let f = (self.fitness)(&c.payload).map_err(|message| SearchError::Fitness {
            lineage: lineage_ids(&c.lineage).join(" "),
            message,
        })?;
        self.cache.insert(c.payload.clone(), f);
        Ok(Some(f))
    }

    /// Extends `parent` by `k` seeded random applicable transforms.
    fn mutate(&self, parent: &Candidate, k: usize, rng: &mut ChaCha8Rng) -> Option<Candidate> {
        let mut cur = parent.clone();
        cur.fitness = None;
        for _ in 0..k {
            let sites = cur.payload.sites(self.dict);
            if sites.is_empty() {
                break;
            }
            let site = sites[rng.random_range(0..sites.len())].clone();
            let step = Applied {
                site,
                seed: rng.random_range(0..1000),
            };
            cur.payload = cur.payload.apply(&step, self.dict).expect("enumerated sites apply");
            cur.lineage.push(step);
        }
        (cur.lineage.len() > parent.lineage.len()).then_some(cur)
    }
}

fn stats(generation: usize, pop: &[Candidate], best_so_far: f64) -> GenerationStats {
    let fs: Vec<f64> = pop.iter().filter_map(|c| c.fitness).collect();
    GenerationStats {
        generation,
        size: fs.len(),
        best: fs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: fs.iter().sum::<f64>() / fs.len().max(1) as f64,
        worst: fs.iter().copied().fold(f64::INFINITY, f64::min),
        best_so_far,
    }
}

/// Evolves transformed variants of `input`, scoring each with `fitness`
/// (the validity score of the model's answer on that variant). Generation 0
/// is the original plus `population - 1` single-mutation children; later
/// generations keep the elites and refill with mutated elites. The best
/// candidate seen is returned, so it is never worse than the original.
pub fn evolve(
    input: &Payload,
    fitness: impl FnMut(&Payload) -> Result<f64, String>,
    cfg: &SearchConfig,
    dict: &SynonymDict,
) -> Result<SearchOutcome, SearchError> {
    cfg.validate()?;
    let mut ev = Evaluator {
        fitness,
        cache: HashMap::new(),
        budget: cfg.budget,
        dict,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut original = Candidate::original(input.clone());
    let f0 = ev.eval(&original)?.expect("budget is positive");
    original.fitness = Some(f0);
    let mut best = original.clone();

    if input.sites(dict).is_empty() {
        return Ok(SearchOutcome {
            history: vec![stats(0, std::slice::from_ref(&best), f0)],
            best,
            original_fitness: f0,
            evaluations: ev.cache.len(),
            no_applicable_transforms: true,
            budget_exhausted: false,
        });
    }

    let mut pop = vec![original.clone()];
    let mut history = Vec::new();
    let mut exhausted = false;
    for generation in 0..cfg.generations {
        let parents: Vec<Candidate> = if generation == 0 {
            vec![original.clone()]
        } else {
            pop.clone()
        };
        let mut attempts = 0;
        while pop.len() < cfg.population && attempts < 4 * cfg.population {
            attempts += 1;
            let parent = &parents[rng.random_range(0..parents.len())];
            let k = if generation == 0 { 1 } else { cfg.mutations };
            let Some(mut child) = ev.mutate(parent, k, &mut rng) else {
                continue;
            };
            match ev.eval(&child)? {
                Some(f) => child.fitness = Some(f),
                None => {
                    exhausted = true;
                    break;
                }
            }
            pop.push(child);
        }
        pop.sort_by(rank);
        if rank(&pop[0], &best) == Ordering::Less {
            best = pop[0].clone();
        }
        history.push(stats(generation, &pop, best.fitness.unwrap_or(f0)));
        pop.truncate(cfg.elites);
        if exhausted {
            break;
        }
    }
    Ok(SearchOutcome {
        best,
        original_fitness: f0,
        history,
        evaluations: ev.cache.len(),
        no_applicable_transforms: false,
        budget_exhausted: exhausted,
    })
}
