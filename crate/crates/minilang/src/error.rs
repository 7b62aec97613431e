use thiserror::Error;

use crate::token::Span;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{span}: {message}")]
    Lex { span: Span, message: String },

    /// `found` is `None` when input ended early.
    #[error("{span}: syntax error at {}, expected {}", found.as_deref().unwrap_or("end of input"), expected.join(" | "))]
    Syntax {
        span: Span,
        found: Option<String>,
        expected: Vec<String>,
    },

    #[error("{span}: duplicate function `{name}`")]
    DuplicateFunction { span: Span, name: String },
}

impl ParseError {
    pub fn span(&self) -> Span {
        match self {
            ParseError::Lex { span, .. }
            | ParseError::Syntax { span, .. }
            | ParseError::DuplicateFunction { span, .. } => *span,
        }
    }
}
