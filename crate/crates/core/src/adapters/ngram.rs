//! Bigram mock generator over the MiniLang token alphabet.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, OnceLock};

use minilang::{lex, prefix_viable, TokenKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Adapter, AdapterError, Capabilities, Flags};
use crate::corpus;
use crate::metrics::GenerationResult;

/// Start-of-sequence context. Never emitted.
pub const BOS: &str = "<s>";
/// End marker; the last vocabulary entry.
pub const EOS: &str = "<eos>";

#[derive(Debug)]
struct Table {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    /// `counts[ctx][next]`; context `vocab.len()` is BOS.
    counts: Vec<Vec<u64>>,
}

/// Order-2 token model with add-one smoothing. Cheap to clone.
#[derive(Debug, Clone)]
pub struct NgramModel {
    table: Arc<Table>,
}

fn lex_texts(src: &str) -> Result<Vec<String>, AdapterError> {
    lex(src)
        .map(|t| t.into_iter().map(|t| t.text).collect())
        .map_err(|e| AdapterError::Parse(e.to_string()))
}

impl NgramModel {
    /// Fits the model to `sources`. The vocabulary is every keyword and
    /// symbol, then corpus identifiers and integers (sorted), then `<eos>`.
    pub fn fit<S: AsRef<str>>(sources: &[S]) -> Result<Self, AdapterError> {
        let seqs: Vec<Vec<String>> = sources
            .iter()
            .map(|s| lex_texts(s.as_ref()))
            .collect::<Result<_, _>>()?;
        let mut idents = BTreeSet::new();
        let mut ints = BTreeSet::new();
        for seq in &seqs {
            for t in seq {
                match lex(t).ok().and_then(|v| v.first().map(|t| t.kind)) {
                    Some(TokenKind::Ident) => {
                        idents.insert(t.clone());
                    }
                    Some(TokenKind::Int) => {
                        ints.insert(t.parse::<u64>().expect("lexed integer"));
                    }
                    _ => {}
                }
            }
        }
        let mut vocab: Vec<String> = TokenKind::fixed().map(|(s, _)| s.to_string()).collect();
        vocab.extend(idents);
        vocab.extend(ints.iter().map(u64::to_string));
        vocab.push(EOS.to_string());
        let index: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let v = vocab.len();
        let mut counts = vec![vec![0u64; v]; v + 1];
        for seq in &seqs {
            let mut ctx = v;
            for t in seq.iter().map(String::as_str).chain([EOS]) {
                let next = index[t];
                counts[ctx][next] += 1;
                ctx = next;
            }
        }
        Ok(NgramModel {
            table: Arc::new(Table { vocab, index, counts }),
        })
    }

    /// The model fitted to the bundled corpus; built once per process.
    pub fn bundled() -> Self {
        static MODEL: OnceLock<NgramModel> = OnceLock::new();
        MODEL
            .get_or_init(|| {
                let srcs: Vec<&str> = corpus::bundled().iter().map(|(_, s)| *s).collect();
                NgramModel::fit(&srcs).expect("bundled corpus lexes")
            })
            .clone()
    }

    /// Makes `token` the overwhelming continuation of `after`, and moves
    /// nearly all continuation mass of `token` onto `<eos>`. Mid-program
    /// the end marker is not viable, so a constrained greedy decoder that
    /// takes the bait continues with near-zero probability.
    pub fn with_trap(&self, after: &str, token: &str) -> Result<Self, AdapterError> {
        let a = self.context_index(after)?;
        let t = self.token_index(token)?;
        let mut counts = self.table.counts.clone();
        let row_total: u64 = counts[a].iter().sum();
        counts[a][t] = 10 * (row_total + 1);
        let eos = self.eos();
        counts[t].iter_mut().for_each(|c| *c = 0);
        counts[t][eos] = 1_000_000;
        Ok(NgramModel {
            table: Arc::new(Table {
                vocab: self.table.vocab.clone(),
                index: self.table.index.clone(),
                counts,
            }),
        })
    }

    pub fn vocab(&self) -> &[String] {
        &self.table.vocab
    }

    pub fn eos(&self) -> usize {
        self.table.vocab.len() - 1
    }

    pub fn token_index(&self, t: &str) -> Result<usize, AdapterError> {
        self.table
            .index
            .get(t)
            .copied()
            .ok_or_else(|| AdapterError::UnknownToken(t.to_string()))
    }

    fn context_index(&self, t: &str) -> Result<usize, AdapterError> {
        if t == BOS {
            Ok(self.table.vocab.len())
        } else {
            self.token_index(t)
        }
    }

    /// Smoothed next-token distribution after context `ctx`.
    fn dist(&self, ctx: usize) -> Vec<f64> {
        let row = &self.table.counts[ctx];
        let denom = (row.iter().sum::<u64>() + row.len() as u64) as f64;
        row.iter().map(|&c| (c + 1) as f64 / denom).collect()
    }

    pub fn next_dist(&self, prefix: &[String]) -> Result<Vec<f64>, AdapterError> {
        let mut ctx = self.table.vocab.len();
        for t in prefix {
            ctx = self.token_index(t)?;
        }
        Ok(self.dist(ctx))
    }

    /// Maps a prompt to forced prefix tokens. A prompt that lexes as a
    /// viable MiniLang prefix is used verbatim; anything else becomes
    /// `fn <name> (` with the first prompt word that is a vocabulary
    /// identifier, or `main`.
    pub fn prompt_prefix(&self, prompt: &str) -> Result<Vec<String>, AdapterError> {
        if let Ok(toks) = lex(prompt) {
            if prefix_viable(&toks) {
                for t in &toks {
                    self.token_index(&t.text)?;
                }
                return Ok(toks.into_iter().map(|t| t.text).collect());
            }
        }
        let name = prompt
            .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .find(|w| minilang::is_identifier(w) && !TokenKind::is_keyword(w) && self.table.index.contains_key(*w))
            .unwrap_or("main");
        Ok(vec!["fn".into(), name.into(), "(".into()])
    }

    /// Decodes from `prompt`. `pick` chooses the next index from the
    /// model distribution.
    fn decode(
        &self,
        prompt: &str,
        max_len: usize,
        mut pick: impl FnMut(&[f64]) -> usize,
    ) -> Result<GenerationResult, AdapterError> {
        let prefix = self.prompt_prefix(prompt)?;
        let mut tokens = Vec::new();
        let mut logprobs = Vec::new();
        let mut dists = Vec::new();
        let mut ctx = self.table.vocab.len();
        for t in &prefix {
            let d = self.dist(ctx);
            let i = self.token_index(t)?;
            logprobs.push(d[i].ln());
            dists.push(d);
            tokens.push(t.clone());
            ctx = i;
        }
        let mut complete = false;
        for _ in 0..max_len {
            let d = self.dist(ctx);
            let i = pick(&d);
            if i == self.eos() {
                complete = true;
                break;
            }
            logprobs.push(d[i].ln());
            tokens.push(self.table.vocab[i].clone());
            dists.push(d);
            ctx = i;
        }
        Ok(GenerationResult {
            tokens,
            logprobs,
            step_dists: Some(dists),
            complete,
        })
    }

    pub fn greedy(&self, prompt: &str, max_len: usize) -> Result<GenerationResult, AdapterError> {
        self.decode(prompt, max_len, argmax)
    }

    pub fn sample_many(
        &self,
        prompt: &str,
        n: usize,
        temperature: f64,
        seed: u64,
        max_len: usize,
    ) -> Result<Vec<GenerationResult>, AdapterError> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(AdapterError::BadRequest(format!(
                "temperature {temperature} must be positive"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| self.decode(prompt, max_len, |d| sample_index(d, temperature, &mut rng)))
            .collect()
    }
}

/// Highest-probability index; ties go to the lowest index.
pub(crate) fn argmax(d: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in d.iter().enumerate() {
        if p > d[best] {
            best = i;
        }
    }
    best
}

/// Draws from `d` sharpened by `1/temperature`. Zero entries are never drawn.
pub(crate) fn sample_index(d: &[f64], temperature: f64, rng: &mut impl Rng) -> usize {
    let w: Vec<f64> = d
        .iter()
        .map(|&p| if p > 0.0 { (p.ln() / temperature).exp() } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    let mut r = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &x) in w.iter().enumerate() {
        if x > 0.0 {
            if r < x {
                return i;
            }
            r -= x;
            last = i;
        }
    }
    last
}

impl Adapter for NgramModel {
    fn id(&self) -> String {
        "builtin:ngram".into()
    }

    fn capabilities(&mut self) -> Result<Capabilities, AdapterError> {
        Ok(Capabilities {
            flags: Flags {
                generate: true,
                sample: true,
                step: true,
                ..Flags::default()
            },
            labels: vec![],
            vocab: self.table.vocab.clone(),
        })
    }

    fn generate(&mut self, prompt: &str, max_len: usize) -> Result<GenerationResult, AdapterError> {
        self.greedy(prompt, max_len)
    }

    fn sample(
        &mut self,
        prompt: &str,
        n: usize,
        temperature: f64,
        seed: u64,
        max_len: usize,
    ) -> Result<Vec<GenerationResult>, AdapterError> {
        self.sample_many(prompt, n, temperature, seed, max_len)
    }

    fn step(&mut self, prefix: &[String]) -> Result<Vec<f64>, AdapterError> {
        self.next_dist(prefix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_layout() {
        let m = NgramModel::bundled();
        assert_eq!(m.vocab()[0], "fn");
        assert_eq!(m.vocab().last().unwrap(), EOS);
        assert!(m.vocab().iter().any(|t| t == "main"));
        assert!(corpus::bundled().len() >= 50);
    }

    #[test]
    fn step_distributions_are_normalized_over_the_vocabulary() {
        let m = NgramModel::bundled();
        for ctx in 0..=m.vocab().len() {
            let d = m.dist(ctx);
            assert_eq!(d.len(), m.vocab().len());
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(d.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn greedy_logprobs_are_self_consistent() {
        let m = NgramModel::bundled();
        let g = m.greedy("fn main(", 40).unwrap();
        let dists = g.step_dists.as_ref().unwrap();
        for (k, t) in g.tokens.iter().enumerate() {
            let i = m.token_index(t).unwrap();
            assert_eq!(g.logprobs[k], dists[k][i].ln());
            if k >= 3 {
                assert_eq!(i, argmax(&dists[k]));
            }
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let m = NgramModel::bundled();
        let a = m.sample_many("", 3, 1.0, 11, 60).unwrap();
        assert_eq!(a, m.sample_many("", 3, 1.0, 11, 60).unwrap());
        assert_ne!(a, m.sample_many("", 3, 1.0, 12, 60).unwrap());
    }

    #[test]
    fn prompt_mapping() {
        let m = NgramModel::bundled();
        assert_eq!(m.prompt_prefix("fn main(").unwrap(), ["fn", "main", "("]);
        assert_eq!(
            m.prompt_prefix("Write the function. It must be fast.").unwrap(),
            ["fn", "main", "("]
        );
        assert!(m.prompt_prefix("").unwrap().is_empty());
        assert_eq!(m.prompt_prefix("fn zzz_not_seen(").unwrap_err().code(), "unknown_token");
    }

    #[test]
    fn trap_dominates_its_context() {
        let m = NgramModel::bundled().with_trap("return", "true").unwrap();
        let d = m.next_dist(&["return".to_string()]).unwrap();
        assert_eq!(argmax(&d), m.token_index("true").unwrap());
        let after = m.next_dist(&["true".to_string()]).unwrap();
        assert!(after[m.eos()] > 0.99);
    }
}
