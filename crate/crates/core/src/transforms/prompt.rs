//! Prompt perturbations P1..P3.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{TransformError, TransformKind, TransformSite};

pub const DEFAULT_SYNONYMS: &str = include_str!("../../data/synonyms.tsv");

/// A natural-language prompt, kept as sentences with their trailing
/// separators so that concatenation reproduces the text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptText {
    segments: Vec<(String, String)>,
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

impl PromptText {
    pub fn new(text: &str) -> Self {
        let chars: Vec<char> = text.chars().collect();
        let mut segments = Vec::new();
        let mut body = String::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            body.push(c);
            i += 1;
            if !is_terminal(c) {
                continue;
            }
            while i < chars.len() && is_terminal(chars[i]) {
                body.push(chars[i]);
                i += 1;
            }
            if i < chars.len() && !chars[i].is_whitespace() {
                continue;
            }
            let mut sep = String::new();
            while i < chars.len() && chars[i].is_whitespace() {
                sep.push(chars[i]);
                i += 1;
            }
            segments.push((std::mem::take(&mut body), sep));
        }
        if !body.is_empty() {
            segments.push((body, String::new()));
        }
        PromptText { segments }
    }

    pub fn text(&self) -> String {
        self.segments
            .iter()
            .flat_map(|(b, s)| [b.as_str(), s.as_str()])
            .collect()
    }

    pub fn sentences(&self) -> Vec<&str> {
        self.segments.iter().map(|(b, _)| b.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

impl fmt::Display for PromptText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

/// Symmetric word-to-word synonym map, keyed by lowercase word.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymDict {
    map: BTreeMap<String, String>,
}

impl SynonymDict {
    /// Parses `word<TAB>synonym` lines; blank lines and `#` comments are
    /// skipped. The first pair mentioning a word wins.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (a, b) = line
                .split_once('\t')
                .ok_or_else(|| format!("line {}: expected word<TAB>synonym", n + 1))?;
            let (a, b) = (a.trim().to_lowercase(), b.trim().to_lowercase());
            if a.is_empty() || b.is_empty() {
                return Err(format!("line {}: empty entry", n + 1));
            }
            map.entry(a.clone()).or_insert_with(|| b.clone());
            map.entry(b).or_insert(a);
        }
        Ok(SynonymDict { map })
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_SYNONYMS).expect("bundled synonym file is well formed")
    }

    pub fn lookup(&self, word: &str) -> Option<&str> {
        self.map.get(&word.to_lowercase()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Byte ranges of maximal alphabetic runs.
fn words(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_alphabetic(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, text.len()));
    }
    out
}

fn match_case(original: &str, replacement: &str) -> String {
    if original.chars().next().is_some_and(char::is_uppercase) {
        let mut cs = replacement.chars();
        match cs.next() {
            Some(c) => c.to_uppercase().chain(cs).collect(),
            None => String::new(),
        }
    } else {
        replacement.to_string()
    }
}

fn synonym_swap(p: &PromptText, seed: u64, dict: &SynonymDict) -> PromptText {
    let mut segments = p.segments.clone();
    let mut candidates = Vec::new();
    for (si, (body, _)) in segments.iter().enumerate() {
        for (a, b) in words(body) {
            if dict.lookup(&body[a..b]).is_some() {
                candidates.push((si, a, b));
            }
        }
    }
    if candidates.is_empty() {
        return p.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<_> = sample(&mut rng, candidates.len(), candidates.len().min(2))
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    // replace right to left so earlier byte ranges stay valid
    picked.sort_by(|x, y| y.cmp(x));
    for (si, a, b) in picked {
        let body = &mut segments[si].0;
        let word = body[a..b].to_string();
        let repl = match_case(&word, dict.lookup(&word).unwrap_or(&word));
        body.replace_range(a..b, &repl);
    }
    PromptText { segments }
}

fn constraint_reorder(p: &PromptText, seed: u64) -> PromptText {
    let rest = p.segments.len().saturating_sub(1);
    if rest < 2 {
        return p.clone();
    }
    let mut bodies: Vec<String> = p.segments[1..].iter().map(|(b, _)| b.clone()).collect();
    bodies.rotate_left((seed % rest as u64) as usize);
    let mut segments = p.segments.clone();
    for (seg, body) in segments[1..].iter_mut().zip(bodies) {
        seg.0 = body;
    }
    PromptText { segments }
}

fn normalize(p: &PromptText) -> PromptText {
    let mut out = String::new();
    let mut last: Option<char> = None;
    for c in p.text().trim().chars() {
        let c = if c.is_whitespace() { ' ' } else { c };
        match last {
            Some(' ') if c == ' ' => continue,
            Some(l) if is_terminal(l) && is_terminal(c) => continue,
            _ => {}
        }
        out.push(c);
        last = Some(c);
    }
    PromptText::new(&out)
}

/// Applies a prompt perturbation. Deterministic given `seed`.
pub fn nl_perturb(
    prompt: &PromptText,
    kind: TransformKind,
    seed: u64,
    dict: &SynonymDict,
) -> Result<PromptText, TransformError> {
    match kind {
        TransformKind::SynonymSwap => Ok(synonym_swap(prompt, seed, dict)),
        TransformKind::ConstraintReorder => Ok(constraint_reorder(prompt, seed)),
        TransformKind::Normalize => Ok(normalize(prompt)),
        other => Err(TransformError::WrongModality(other)),
    }
}

/// Prompt perturbations that would change this prompt for at least one seed.
pub fn enumerate_prompt_sites(prompt: &PromptText, dict: &SynonymDict) -> Vec<TransformSite> {
    let mut out = Vec::new();
    let has_word = prompt
        .segments
        .iter()
        .any(|(b, _)| words(b).iter().any(|&(x, y)| dict.lookup(&b[x..y]).is_some()));
    if has_word {
        out.push(TransformSite::new(TransformKind::SynonymSwap, vec![], 0));
    }
    if prompt.len() >= 3 {
        out.push(TransformSite::new(TransformKind::ConstraintReorder, vec![], 0));
    }
    if normalize(prompt) != *prompt {
        out.push(TransformSite::new(TransformKind::Normalize, vec![], 0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str, kind: TransformKind, seed: u64, dict: &SynonymDict) -> String {
        nl_perturb(&PromptText::new(text), kind, seed, dict).unwrap().text()
    }

    #[test]
    fn sentences_reassemble() {
        for text in ["", "a", "One. Two?  Three!", "Pi is 3.14 ok. Done...  ", "x\n\ny."] {
            assert_eq!(PromptText::new(text).text(), text);
        }
        let p = PromptText::new("Write a function. It must sort. It must be stable.");
        assert_eq!(
            p.sentences(),
            vec!["Write a function.", "It must sort.", "It must be stable."]
        );
    }

    #[test]
    fn reorder_rotates_tail() {
        let d = SynonymDict::default();
        let text = "Write a function. It must sort. It must be stable.";
        assert_eq!(
            run(text, TransformKind::ConstraintReorder, 1, &d),
            "Write a function. It must be stable. It must sort."
        );
        assert_eq!(run(text, TransformKind::ConstraintReorder, 2, &d), text);
        assert_eq!(run("Only one.", TransformKind::ConstraintReorder, 1, &d), "Only one.");
    }

    #[test]
    fn normalize_collapses() {
        let d = SynonymDict::default();
        assert_eq!(run("a  b   c", TransformKind::Normalize, 0, &d), "a b c");
        assert_eq!(
            run(" Sort it!!  Now..\n", TransformKind::Normalize, 0, &d),
            "Sort it! Now."
        );
    }

    #[test]
    fn synonym_swap() {
        let empty = SynonymDict::default();
        let text = "Write a function that returns the largest number.";
        assert_eq!(run(text, TransformKind::SynonymSwap, 3, &empty), text);
        let dict = SynonymDict::builtin();
        let out = run(text, TransformKind::SynonymSwap, 3, &dict);
        assert_ne!(out, text);
        assert_eq!(out, run(text, TransformKind::SynonymSwap, 3, &dict));
        let changed = words(text)
            .into_iter()
            .zip(words(&out))
            .filter(|(a, b)| text[a.0..a.1] != out[b.0..b.1])
            .count();
        assert!(changed <= 2);
        assert_eq!(run("Write it.", TransformKind::SynonymSwap, 0, &dict), "Implement it.");
    }

    #[test]
    fn dictionary_format() {
        let d = SynonymDict::parse("# comment\nfoo\tbar\n\n").unwrap();
        assert_eq!(d.lookup("Foo"), Some("bar"));
        assert_eq!(d.lookup("bar"), Some("foo"));
        assert!(SynonymDict::parse("no tab here").is_err());
        assert!(SynonymDict::builtin().len() >= 40);
    }

    #[test]
    fn code_kinds_are_rejected() {
        let p = PromptText::new("x");
        assert!(nl_perturb(&p, TransformKind::FlipIf, 0, &SynonymDict::default()).is_err());
    }
}
