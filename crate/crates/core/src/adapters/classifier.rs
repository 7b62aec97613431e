//! Planted-bias mock classifier.

use minilang::ast::{walk_exprs, walk_stmts};
use minilang::{parse, pretty, BinOp, Block, Expr, Program, Stmt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Adapter, AdapterError, Capabilities, Flags};
use crate::metrics::ProbVector;

pub const LABELS: [&str; 2] = ["clean", "defective"];

/// Constants of the mock. The bias must exceed the rule margin for a biased
/// input to be misclassified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MockClassifierSpec {
    pub margin: f64,
    pub bias_strength: f64,
    /// Identifiers of at most this many characters trigger the bias.
    pub short_len: usize,
    pub noise_sigma: f64,
}

impl Default for MockClassifierSpec {
    fn default() -> Self {
        MockClassifierSpec {
            margin: 2.5,
            bias_strength: 4.0,
            short_len: 2,
            noise_sigma: 0.3,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MockClassifier {
    pub spec: MockClassifierSpec,
}

fn max_loop_depth(block: &Block) -> usize {
    block
        .iter()
        .map(|s| match s {
            Stmt::While { body, .. } => 1 + max_loop_depth(body),
            Stmt::If {
                then_block, else_block, ..
            } => max_loop_depth(then_block).max(max_loop_depth(else_block)),
            _ => 0,
        })
        .max()
        .unwrap_or(0)
}

/// The 8 features: functions, params, lets, ifs, whiles, divisions,
/// comparisons, max loop depth.
pub fn embed_features(p: &Program) -> Vec<f64> {
    let mut f = [0usize; 8];
    f[0] = p.functions.len();
    for func in &p.functions {
        f[1] += func.params.len();
        walk_stmts(&func.body, &mut |s| match s {
            Stmt::Let { .. } => f[2] += 1,
            Stmt::If { .. } => f[3] += 1,
            Stmt::While { .. } => f[4] += 1,
            _ => {}
        });
        walk_exprs(&func.body, &mut |e| {
            if let Expr::Binary(op, ..) = e {
                if matches!(op, BinOp::Div | BinOp::Rem) {
                    f[5] += 1;
                } else if op.is_comparison() {
                    f[6] += 1;
                }
            }
        });
        f[7] = f[7].max(max_loop_depth(&func.body));
    }
    f.iter().map(|&c| c as f64).collect()
}

/// Ground-truth class: 1 ("defective") iff the program divides or nests a
/// loop inside a loop.
pub fn hidden_label(p: &Program) -> usize {
    let f = embed_features(p);
    usize::from(f[5] > 0.0 || f[7] >= 2.0)
}

/// Linear head on the embedding: defective logit `10·div + 5·depth − 7.5`.
fn head(z: &[f64]) -> ProbVector {
    ProbVector::softmax(&[0.0, 10.0 * z[5] + 5.0 * z[7] - 7.5])
}

fn noise_rng(p: &Program, seed: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(pretty(p).as_bytes());
    h.update(seed.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

impl MockClassifier {
    pub fn new(spec: MockClassifierSpec) -> Self {
        MockClassifier { spec }
    }

    pub fn is_biased(&self, p: &Program) -> bool {
        p.identifiers().iter().any(|n| n.len() <= self.spec.short_len)
    }

    pub fn logits(&self, p: &Program) -> [f64; 2] {
        let label = hidden_label(p);
        let mut l = [0.0; 2];
        l[label] += self.spec.margin;
        if self.is_biased(p) {
            l[1 - label] += self.spec.bias_strength;
        }
        l
    }

    pub fn classify_program(&self, p: &Program, seed: Option<u64>) -> ProbVector {
        let mut l = self.logits(p);
        if let Some(seed) = seed {
            let mut rng = noise_rng(p, seed);
            let normal = Normal::new(0.0, self.spec.noise_sigma).expect("sigma validated");
            for x in &mut l {
                *x += normal.sample(&mut rng);
            }
        }
        ProbVector::softmax(&l)
    }
}

fn parse_source(source: &str) -> Result<Program, AdapterError> {
    parse(source).map_err(|e| AdapterError::Parse(e.to_string()))
}

impl Adapter for MockClassifier {
    fn id(&self) -> String {
        "builtin:classifier".into()
    }

    fn capabilities(&mut self) -> Result<Capabilities, AdapterError> {
        Ok(Capabilities {
            flags: Flags {
                classify: true,
                classify_stochastic: true,
                embed: true,
                classify_embedding: true,
                ..Flags::default()
            },
            labels: LABELS.iter().map(|s| s.to_string()).collect(),
            vocab: vec![],
        })
    }

    fn classify(&mut self, source: &str) -> Result<ProbVector, AdapterError> {
        Ok(self.classify_program(&parse_source(source)?, None))
    }

    fn classify_stochastic(&mut self, source: &str, seed: u64) -> Result<ProbVector, AdapterError> {
        Ok(self.classify_program(&parse_source(source)?, Some(seed)))
    }

    fn embed(&mut self, source: &str) -> Result<Vec<f64>, AdapterError> {
        Ok(embed_features(&parse_source(source)?))
    }

    fn classify_embedding(&mut self, z: &[f64]) -> Result<ProbVector, AdapterError> {
        if z.len() != 8 || z.iter().any(|x| !x.is_finite()) {
            return Err(AdapterError::BadRequest(format!(
                "expected 8 finite features, got {}",
                z.len()
            )));
        }
        Ok(head(z))
    }
}
