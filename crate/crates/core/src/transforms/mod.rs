//! Semantics-preserving program rewrites and meaning-preserving prompt
//! perturbations.
//!
//! Every code transform is gated by a conservative applicability predicate;
//! [`enumerate_applicable`] lists the sites where it holds, and
//! [`apply_transform`] refuses any other site.

mod analysis;
mod code;
pub mod path;
mod prompt;

use std::fmt;
use std::str::FromStr;

use minilang::{interpret, Outcome, Program, Value};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use code::{apply_transform, enumerate_applicable};
pub use prompt::{enumerate_prompt_sites, nl_perturb, PromptText, SynonymDict, DEFAULT_SYNONYMS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransformKind {
    #[serde(rename = "T1_RenameIdents")]
    RenameIdents,
    #[serde(rename = "T2_FlipIf")]
    FlipIf,
    #[serde(rename = "T3_UnrollWhileOnce")]
    UnrollWhileOnce,
    #[serde(rename = "T4_CommutativeSwap")]
    CommutativeSwap,
    #[serde(rename = "T5_DeadLetInsert")]
    DeadLetInsert,
    #[serde(rename = "T6_DeadLetRemove")]
    DeadLetRemove,
    #[serde(rename = "T7_StmtReorder")]
    StmtReorder,
    #[serde(rename = "T8_ConstantFold")]
    ConstantFold,
    #[serde(rename = "P1_SynonymSwap")]
    SynonymSwap,
    #[serde(rename = "P2_ConstraintReorder")]
    ConstraintReorder,
    #[serde(rename = "P3_Normalize")]
    Normalize,
}

impl TransformKind {
    pub const ALL: [TransformKind; 11] = [
        TransformKind::RenameIdents,
        TransformKind::FlipIf,
        TransformKind::UnrollWhileOnce,
        TransformKind::CommutativeSwap,
        TransformKind::DeadLetInsert,
        TransformKind::DeadLetRemove,
        TransformKind::StmtReorder,
        TransformKind::ConstantFold,
        TransformKind::SynonymSwap,
        TransformKind::ConstraintReorder,
        TransformKind::Normalize,
    ];

    pub fn id(self) -> &'static str {
        match self {
            TransformKind::RenameIdents => "T1_RenameIdents",
            TransformKind::FlipIf => "T2_FlipIf",
            TransformKind::UnrollWhileOnce => "T3_UnrollWhileOnce",
            TransformKind::CommutativeSwap => "T4_CommutativeSwap",
            TransformKind::DeadLetInsert => "T5_DeadLetInsert",
            TransformKind::DeadLetRemove => "T6_DeadLetRemove",
            TransformKind::StmtReorder => "T7_StmtReorder",
            TransformKind::ConstantFold => "T8_ConstantFold",
            TransformKind::SynonymSwap => "P1_SynonymSwap",
            TransformKind::ConstraintReorder => "P2_ConstraintReorder",
            TransformKind::Normalize => "P3_Normalize",
        }
    }

    pub fn is_code(self) -> bool {
        !self.is_prompt()
    }

    pub fn is_prompt(self) -> bool {
        matches!(
            self,
            TransformKind::SynonymSwap | TransformKind::ConstraintReorder | TransformKind::Normalize
        )
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for TransformKind {
    type Err = TransformError;

    /// Accepts the full id (`T1_RenameIdents`) or its short prefix (`T1`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TransformKind::ALL
            .into_iter()
            .find(|k| k.id().eq_ignore_ascii_case(s) || k.id()[..2].eq_ignore_ascii_case(s))
            .ok_or_else(|| TransformError::UnknownKind(s.to_string()))
    }
}

/// Where a transform applies. `param` is kind-specific: the statement index
/// for T6, the first index of the swapped pair for T7, zero otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TransformSite {
    pub kind: TransformKind,
    pub path: Vec<usize>,
    pub param: usize,
}

impl TransformSite {
    pub fn new(kind: TransformKind, path: Vec<usize>, param: usize) -> Self {
        TransformSite { kind, path, param }
    }
}

impl fmt::Display for TransformSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path: Vec<String> = self.path.iter().map(|i| i.to_string()).collect();
        write!(f, "{}@[{}]#{}", self.kind, path.join("."), self.param)
    }
}

/// One applied step of a lineage.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Applied {
    pub site: TransformSite,
    pub seed: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransformError {
    #[error("transform {0} is not applicable here")]
    Inapplicable(TransformSite),
    #[error("{0} does not apply to this input modality")]
    WrongModality(TransformKind),
    #[error("unknown transform `{0}`")]
    UnknownKind(String),
}

/// Result of running two programs on the same argument vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Same,
    /// Either side ran out of fuel.
    Inconclusive,
    Differs(Outcome, Outcome),
}

/// Compares the entry-function outcomes of `a` and `b` on `args`.
pub fn compare_outcomes(a: &Program, b: &Program, entry: &str, args: &[Value], fuel: u64) -> Verdict {
    let oa = interpret(a, entry, args, fuel);
    let ob = interpret(b, entry, args, fuel);
    if oa.is_fuel_exhausted() || ob.is_fuel_exhausted() {
        Verdict::Inconclusive
    } else if oa == ob {
        Verdict::Same
    } else {
        Verdict::Differs(oa, ob)
    }
}
