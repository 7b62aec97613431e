//! Grammar-constrained and window-revising decoding over a step adapter.

use minilang::{parse_tokens, prefix_viable, tokens_from_texts, Token, TokenKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::adapters::{Adapter, AdapterError, EOS};
use crate::metrics::GenerationResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Greedy,
    Sample { temperature: f64, seed: u64 },
}

/// The adapter's vocabulary split into lexable tokens and the end marker.
struct Vocab {
    texts: Vec<String>,
    tokens: Vec<Option<Token>>,
    eos: Option<usize>,
}

impl Vocab {
    fn of(adapter: &mut dyn Adapter) -> Result<Self, SearchError> {
        let caps = adapter.capabilities()?;
        if !caps.flags.step {
            return Err(AdapterError::MissingCapability("step".into()).into());
        }
        let tokens = caps
            .vocab
            .iter()
            .map(|t| tokens_from_texts(&[t]).map(|mut v| v.remove(0)))
            .collect();
        let eos = caps.vocab.iter().position(|t| t == EOS);
        Ok(Vocab {
            texts: caps.vocab,
            tokens,
            eos,
        })
    }
}

/// Incremental decoding state: token texts plus their lexed form.
#[derive(Clone)]
struct State {
    texts: Vec<String>,
    toks: Vec<Token>,
    logprobs: Vec<f64>,
    dists: Vec<Vec<f64>>,
    complete: bool,
}

impl State {
    fn start(prefix: &[String]) -> Result<Self, SearchError> {
        let toks = tokens_from_texts(prefix)
            .filter(|t| prefix_viable(t))
            .ok_or_else(|| SearchError::BadPrefix(prefix.join(" ")))?;
        Ok(State {
            texts: prefix.to_vec(),
            toks,
            logprobs: Vec::new(),
            dists: Vec::new(),
            complete: false,
        })
    }

    fn into_result(self) -> GenerationResult {
        GenerationResult {
            tokens: self.texts,
            logprobs: self.logprobs,
            step_dists: Some(self.dists),
            complete: self.complete,
        }
    }
}

fn with_token(toks: &[Token], t: &Token) -> Vec<Token> {
    let mut v = toks.to_vec();
    let mut t = t.clone();
    t.span = minilang::Span::new(1, v.len() as u32 + 1);
    v.push(t);
    v
}

/// Viability of every vocabulary entry after `toks`. Viability depends only
/// on the token kind, except for a function name, which must not repeat an
/// earlier one; those are checked one by one.
pub(crate) fn viable_mask(vocab_tokens: &[Option<Token>], eos: Option<usize>, toks: &[Token]) -> Vec<bool> {
    let after_fn = toks.last().is_some_and(|t| t.kind == TokenKind::Fn);
    let mut by_kind: Vec<(TokenKind, bool)> = Vec::new();
    let mut mask: Vec<bool> = vocab_tokens
        .iter()
        .map(|t| match t {
            None => false,
            Some(t) if after_fn && t.kind == TokenKind::Ident => prefix_viable(&with_token(toks, t)),
            Some(t) => match by_kind.iter().find(|(k, _)| *k == t.kind) {
                Some(&(_, v)) => v,
                None => {
                    let v = prefix_viable(&with_token(toks, t));
                    by_kind.push((t.kind, v));
                    v
                }
            },
        })
        .collect();
    if let Some(e) = eos {
        mask[e] = parse_tokens(toks).is_ok();
    }
    mask
}

/// Viable indices ordered by masked probability, highest first; ties by
/// vocabulary index.
fn ranked(dist: &[f64], mask: &[bool]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dist.len()).filter(|&i| mask[i] && dist[i] > 0.0).collect();
    idx.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    idx
}

/// Raw distribution, viable indices ranked, and the viability mask.
type Masked = (Vec<f64>, Vec<usize>, Vec<bool>);

struct Decoder<'a> {
    adapter: &'a mut dyn Adapter,
    vocab: Vocab,
}

impl Decoder<'_> {
    /// Masked step: returns the raw distribution and viable indices ranked.
    fn step(&mut self, st: &State) -> Result<Masked, SearchError> {
        let dist = self.adapter.step(&st.texts)?;
        if dist.len() != self.vocab.texts.len() {
            return Err(AdapterError::Internal(format!(
                "step returned {} probabilities for a vocabulary of {}",
                dist.len(),
                self.vocab.texts.len()
            ))
            .into());
        }
        let mask = viable_mask(&self.vocab.tokens, self.vocab.eos, &st.toks);
        let order = ranked(&dist, &mask);
        if order.is_empty() {
            return Err(SearchError::NoViableToken(st.texts.join(" ")));
        }
        Ok((dist, order, mask))
    }

    fn push(&self, st: &mut State, i: usize, dist: Vec<f64>) {
        if Some(i) == self.vocab.eos {
            st.complete = true;
            return;
        }
        let tok = self.vocab.tokens[i].as_ref().expect("masked tokens lex");
        st.toks = with_token(&st.toks, tok);
        st.texts.push(self.vocab.texts[i].clone());
        st.logprobs.push(dist[i].ln());
        st.dists.push(dist);
    }

    /// Decodes up to `n` tokens. `first_rank` picks the k-th best viable
    /// token at the first position; later positions use `mode`.
    fn run(
        &mut self,
        st: &mut State,
        n: usize,
        first_rank: usize,
        mode: DecodeMode,
        rng: &mut ChaCha8Rng,
    ) -> Result<bool, SearchError> {
        for k in 0..n {
            if st.complete {
                break;
            }
            let (dist, order, mask) = self.step(st)?;
            let i = if k == 0 && first_rank > 0 {
                match order.get(first_rank) {
                    Some(&i) => i,
                    None => return Ok(false),
                }
            } else {
                match mode {
                    DecodeMode::Greedy => order[0],
                    DecodeMode::Sample { temperature, .. } => {
                        let masked: Vec<f64> = dist.iter().zip(&mask).map(|(p, &m)| if m { *p } else { 0.0 }).collect();
                        crate::adapters::sample_index(&masked, temperature, rng)
                    }
                }
            };
            self.push(st, i, dist);
        }
        Ok(true)
    }
}

fn seed_of(mode: DecodeMode) -> u64 {
    match mode {
        DecodeMode::Greedy => 0,
        DecodeMode::Sample { seed, .. } => seed,
    }
}

/// Decodes at most `max_len` tokens after `prefix`, masking every token
/// that would make the sequence unparseable. `<eos>` is allowed only once
/// the sequence is a complete program; `complete` reports whether it was
/// chosen. The prefix is part of the returned tokens but has no logprobs.
pub fn constrained_decode(
    adapter: &mut dyn Adapter,
    prefix: &[String],
    max_len: usize,
    mode: DecodeMode,
) -> Result<GenerationResult, SearchError> {
    if let DecodeMode::Sample { temperature, .. } = mode {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(SearchError::Config(format!(
                "temperature {temperature} must be positive"
            )));
        }
    }
    let vocab = Vocab::of(adapter)?;
    let mut dec = Decoder { adapter, vocab };
    let mut st = State::start(prefix)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed_of(mode));
    dec.run(&mut st, max_len, 0, mode, &mut rng)?;
    Ok(st.into_result())
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NEG_INFINITY
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReviseConfig {
    pub window: usize,
    /// Windows whose mean natural-log probability falls below this are
    /// re-decoded once.
    pub logprob_floor: f64,
}

impl Default for ReviseConfig {
    fn default() -> Self {
        ReviseConfig {
            window: 4,
            logprob_floor: -2.5,
        }
    }
}

/// Greedy constrained decoding in windows. A window whose mean logprob is
/// below the floor is re-decoded once from its start, taking the
/// second-ranked viable token first; the better window is kept. The result
/// is finally compared with the plain greedy decode and the one with the
/// higher mean logprob is returned.
pub fn revise_decode(
    adapter: &mut dyn Adapter,
    prefix: &[String],
    cfg: ReviseConfig,
    max_len: usize,
) -> Result<(GenerationResult, usize), SearchError> {
    if cfg.window == 0 {
        return Err(SearchError::Config("window must be at least 1".into()));
    }
    let vocab = Vocab::of(adapter)?;
    let mut dec = Decoder { adapter, vocab };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let start = State::start(prefix)?;

    let mut plain = start.clone();
    dec.run(&mut plain, max_len, 0, DecodeMode::Greedy, &mut rng)?;

    let mut st = start;
    let mut revisions = 0;
    let mut used = 0;
    while used < max_len && !st.complete {
        let n = cfg.window.min(max_len - used);
        let base = st.logprobs.len();
        let mut first = st.clone();
        dec.run(&mut first, n, 0, DecodeMode::Greedy, &mut rng)?;
        let m1 = mean(&first.logprobs[base..]);
        if m1 < cfg.logprob_floor {
            let mut second = st.clone();
            if dec.run(&mut second, n, 1, DecodeMode::Greedy, &mut rng)? && mean(&second.logprobs[base..]) > m1 {
                first = second;
                revisions += 1;
            }
        }
        st = first;
        used += n;
    }
    if mean(&st.logprobs) >= mean(&plain.logprobs) {
        Ok((st.into_result(), revisions))
    } else {
        Ok((plain.into_result(), 0))
    }
}
