//! MiniLang: a small imperative language used as an executable code
//! substrate.
//!
//! - [`parse`] turns source into a [`Program`] under an LL(1) grammar.
//! - [`pretty`] prints the canonical form; `parse(pretty(p)) == p`.
//! - [`interpret`] runs a function under a fuel budget and returns an
//!   [`Outcome`] as data.
//! - [`prefix_viable`] decides whether a token prefix can still become a
//!   program.
//!
//! All functions are pure and thread-safe.

pub mod ast;
pub mod error;
pub mod interp;
pub mod parser;
pub mod pretty;
pub mod token;

pub use ast::{BinOp, Block, Expr, FnDef, Program, Stmt, UnaryOp};
pub use error::ParseError;
pub use interp::{eval_const, interpret, Outcome, RuntimeError, Value, DEFAULT_FUEL};
pub use parser::{parse, parse_tokens, prefix_viable, prefix_viable_texts, tokens_from_texts};
pub use pretty::{pretty, pretty_expr};
pub use token::{is_identifier, lex, Span, Token, TokenKind};
