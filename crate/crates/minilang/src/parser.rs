//! LL(1) recursive-descent parser.
//!
//! The same parser answers prefix viability: running out of input is
//! reported separately from a genuine syntax error, and because every
//! nonterminal derives some finite string, a token sequence that is consumed
//! without error can always be completed.

use std::collections::HashSet;

use crate::ast::{BinOp, Block, Expr, FnDef, Program, Stmt, UnaryOp};
use crate::error::ParseError;
use crate::token::{int_value, lex, Span, Token, TokenKind};

enum Fail {
    Error(ParseError),
    /// Input ended while the parser still needed one of `expected`.
    Incomplete {
        expected: Vec<String>,
    },
}

type PResult<T> = Result<T, Fail>;

struct Parser<'t> {
    toks: &'t [Token],
    pos: usize,
    fn_names: HashSet<&'t str>,
}

fn names(kinds: &[TokenKind]) -> Vec<String> {
    kinds.iter().map(|k| k.describe().to_string()).collect()
}

const STMT_START: [TokenKind; 6] = [
    TokenKind::Let,
    TokenKind::Ident,
    TokenKind::If,
    TokenKind::While,
    TokenKind::Return,
    TokenKind::RBrace,
];

const PRIMARY_START: [TokenKind; 7] = [
    TokenKind::Int,
    TokenKind::True,
    TokenKind::False,
    TokenKind::Ident,
    TokenKind::LParen,
    TokenKind::Bang,
    TokenKind::Minus,
];

impl<'t> Parser<'t> {
    fn new(toks: &'t [Token]) -> Self {
        Parser {
            toks,
            pos: 0,
            fn_names: HashSet::new(),
        }
    }

    fn peek(&self) -> Option<&'t Token> {
        self.toks.get(self.pos)
    }

    fn peek_kind(&self) -> Option<TokenKind> {
        self.peek().map(|t| t.kind)
    }

    fn fail(&self, expected: &[TokenKind]) -> Fail {
        let mut exp = names(expected);
        exp.dedup();
        match self.peek() {
            None => Fail::Incomplete { expected: exp },
            Some(t) => Fail::Error(ParseError::Syntax {
                span: t.span,
                found: Some(t.text.clone()),
                expected: exp,
            }),
        }
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<&'t Token> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                self.pos += 1;
                Ok(t)
            }
            _ => Err(self.fail(&[kind])),
        }
    }

    fn eat(&mut self, kind: TokenKind) -> bool {
        if self.peek_kind() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn program(&mut self) -> PResult<Program> {
        let mut functions = Vec::new();
        loop {
            match self.peek_kind() {
                None if !functions.is_empty() => return Ok(Program { functions }),
                _ => functions.push(self.fndef()?),
            }
        }
    }

    fn fndef(&mut self) -> PResult<FnDef> {
        self.expect(TokenKind::Fn)?;
        let name_tok = self.expect(TokenKind::Ident)?;
        if !self.fn_names.insert(name_tok.text.as_str()) {
            return Err(Fail::Error(ParseError::DuplicateFunction {
                span: name_tok.span,
                name: name_tok.text.clone(),
            }));
        }
        self.expect(TokenKind::LParen)?;
        let mut params = Vec::new();
        match self.peek_kind() {
            Some(TokenKind::RParen) => {}
            Some(TokenKind::Ident) => loop {
                params.push(self.expect(TokenKind::Ident)?.text.clone());
                if !self.eat(TokenKind::Comma) {
                    break;
                }
            },
            _ => return Err(self.fail(&[TokenKind::Ident, TokenKind::RParen])),
        }
        self.expect(TokenKind::RParen)?;
        let body = self.block()?;
        Ok(FnDef {
            name: name_tok.text.clone(),
            params,
            body,
        })
    }

    fn block(&mut self) -> PResult<Block> {
        self.expect(TokenKind::LBrace)?;
        let mut stmts = Vec::new();
        loop {
            if self.eat(TokenKind::RBrace) {
                return Ok(stmts);
            }
            stmts.push(self.stmt()?);
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        match self.peek_kind() {
            Some(TokenKind::Let) => {
                self.pos += 1;
                let name = self.expect(TokenKind::Ident)?.text.clone();
                self.expect(TokenKind::Assign)?;
                let value = self.expr()?;
                self.expect(TokenKind::Semi)?;
                Ok(Stmt::Let { name, value })
            }
            Some(TokenKind::Ident) => {
                let name = self.expect(TokenKind::Ident)?.text.clone();
                self.expect(TokenKind::Assign)?;
                let value = self.expr()?;
                self.expect(TokenKind::Semi)?;
                Ok(Stmt::Assign { name, value })
            }
            Some(TokenKind::If) => {
                self.pos += 1;
                self.expect(TokenKind::LParen)?;
                let cond = self.expr()?;
                self.expect(TokenKind::RParen)?;
                let then_block = self.block()?;
                let else_block = if self.eat(TokenKind::Else) {
                    self.block()?
                } else {
                    Vec::new()
                };
                Ok(Stmt::If {
                    cond,
                    then_block,
                    else_block,
                })
            }
            Some(TokenKind::While) => {
                self.pos += 1;
                self.expect(TokenKind::LParen)?;
                let cond = self.expr()?;
                self.expect(TokenKind::RParen)?;
                let body = self.block()?;
                Ok(Stmt::While { cond, body })
            }
            Some(TokenKind::Return) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(TokenKind::Semi)?;
                Ok(Stmt::Return(e))
            }
            _ => Err(self.fail(&STMT_START)),
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and()?;
        while self.eat(TokenKind::OrOr) {
            let rhs = self.and()?;
            lhs = Expr::binary(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> PResult<Expr> {
        let mut lhs = self.cmp()?;
        while self.eat(TokenKind::AndAnd) {
            let rhs = self.cmp()?;
            lhs = Expr::binary(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn cmp(&mut self) -> PResult<Expr> {
        let lhs = self.add()?;
        let op = match self.peek_kind() {
            Some(TokenKind::EqEq) => BinOp::Eq,
            Some(TokenKind::NotEq) => BinOp::Ne,
            Some(TokenKind::Lt) => BinOp::Lt,
            Some(TokenKind::Le) => BinOp::Le,
            Some(TokenKind::Gt) => BinOp::Gt,
            Some(TokenKind::Ge) => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.pos += 1;
        let rhs = self.add()?;
        Ok(Expr::binary(op, lhs, rhs))
    }

    fn add(&mut self) -> PResult<Expr> {
        let mut lhs = self.mul()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Plus) => BinOp::Add,
                Some(TokenKind::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.mul()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn mul(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Star) => BinOp::Mul,
                Some(TokenKind::Slash) => BinOp::Div,
                Some(TokenKind::Percent) => BinOp::Rem,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        let op = match self.peek_kind() {
            Some(TokenKind::Bang) => UnaryOp::Not,
            Some(TokenKind::Minus) => UnaryOp::Neg,
            _ => return self.primary(),
        };
        self.pos += 1;
        Ok(Expr::unary(op, self.unary()?))
    }

    fn primary(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek() else {
            return Err(self.fail(&PRIMARY_START));
        };
        match tok.kind {
            TokenKind::Int => {
                self.pos += 1;
                // the lexer already range-checked the digits
                Ok(Expr::Int(int_value(&tok.text).unwrap_or_default()))
            }
            TokenKind::True => {
                self.pos += 1;
                Ok(Expr::Bool(true))
            }
            TokenKind::False => {
                self.pos += 1;
                Ok(Expr::Bool(false))
            }
            TokenKind::Ident => {
                self.pos += 1;
                if !self.eat(TokenKind::LParen) {
                    return Ok(Expr::Var(tok.text.clone()));
                }
                let mut args = Vec::new();
                if !self.eat(TokenKind::RParen) {
                    loop {
                        args.push(self.expr()?);
                        if !self.eat(TokenKind::Comma) {
                            break;
                        }
                    }
                    self.expect(TokenKind::RParen)?;
                }
                Ok(Expr::Call(tok.text.clone(), args))
            }
            TokenKind::LParen => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            _ => Err(self.fail(&PRIMARY_START)),
        }
    }
}

fn end_span(toks: &[Token]) -> Span {
    toks.last()
        .map(|t| Span::new(t.span.line, t.span.col + t.text.chars().count() as u32))
        .unwrap_or(Span::new(1, 1))
}

/// Parses a complete program from tokens.
pub fn parse_tokens(toks: &[Token]) -> Result<Program, ParseError> {
    match Parser::new(toks).program() {
        Ok(p) => Ok(p),
        Err(Fail::Error(e)) => Err(e),
        Err(Fail::Incomplete { expected }) => Err(ParseError::Syntax {
            span: end_span(toks),
            found: None,
            expected,
        }),
    }
}

/// Parses MiniLang source text.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    parse_tokens(&lex(source)?)
}

/// True iff `toks` can be extended by zero or more tokens into a complete
/// program.
pub fn prefix_viable(toks: &[Token]) -> bool {
    !matches!(Parser::new(toks).program(), Err(Fail::Error(_)))
}

/// Lexes each text as exactly one token. Returns `None` if any text is not a
/// single token.
pub fn tokens_from_texts<S: AsRef<str>>(texts: &[S]) -> Option<Vec<Token>> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            Token::from_text(t.as_ref()).map(|mut tok| {
                tok.span = Span::new(1, i as u32 + 1);
                tok
            })
        })
        .collect()
}

/// [`prefix_viable`] over token spellings; a spelling that is not a single
/// token makes the prefix non-viable.
pub fn prefix_viable_texts<S: AsRef<str>>(texts: &[S]) -> bool {
    tokens_from_texts(texts).is_some_and(|t| prefix_viable(&t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{BinOp, Expr, Stmt};

    #[test]
    fn single_function_single_param() {
        let p = parse("fn main(a){return a;}").unwrap();
        assert_eq!(p.functions.len(), 1);
        assert_eq!(p.functions[0].params, vec!["a".to_string()]);
        assert_eq!(p.functions[0].body, vec![Stmt::Return(Expr::var("a"))]);
    }

    #[test]
    fn multiplication_binds_tighter() {
        let p = parse("fn f(){return 1+2*3;}").unwrap();
        let expected = Expr::binary(
            BinOp::Add,
            Expr::Int(1),
            Expr::binary(BinOp::Mul, Expr::Int(2), Expr::Int(3)),
        );
        assert_eq!(p.functions[0].body, vec![Stmt::Return(expected)]);
    }

    #[test]
    fn let_without_name_reports_expected_ident() {
        match parse("fn f(){let;}") {
            Err(ParseError::Syntax { found, expected, .. }) => {
                assert_eq!(found.as_deref(), Some(";"));
                assert_eq!(expected, vec!["IDENT".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn comparisons_do_not_chain() {
        assert!(parse("fn f(a){return a < 1 < 2;}").is_err());
        assert!(parse("fn f(a){return (a < 1) == true;}").is_ok());
    }

    #[test]
    fn left_associative_subtraction() {
        let p = parse("fn f(){return 8-4-2;}").unwrap();
        let expected = Expr::binary(
            BinOp::Sub,
            Expr::binary(BinOp::Sub, Expr::Int(8), Expr::Int(4)),
            Expr::Int(2),
        );
        assert_eq!(p.functions[0].body, vec![Stmt::Return(expected)]);
    }

    #[test]
    fn duplicate_functions_rejected() {
        assert!(matches!(
            parse("fn f(){return 1;} fn f(){return 2;}"),
            Err(ParseError::DuplicateFunction { .. })
        ));
    }

    #[test]
    fn empty_source_is_incomplete() {
        match parse("") {
            Err(ParseError::Syntax { found: None, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn expression_statements_are_not_allowed() {
        assert!(parse("fn f(){ g(1); return 0; }").is_err());
    }

    #[test]
    fn prefix_examples() {
        assert!(prefix_viable_texts(&["fn", "main", "("]));
        assert!(!prefix_viable_texts(&[";"]));
        assert!(!prefix_viable_texts(&["fn", "main", ")"]));
        assert!(prefix_viable_texts::<&str>(&[]));
        assert!(prefix_viable_texts(&["fn", "f", "(", ")", "{", "}"]));
        assert!(!prefix_viable_texts(&["fn", "f", "(", ")", "{", "}", "}"]));
        assert!(!prefix_viable_texts(&["fn", "f", "(", ")", "{", "}", "fn", "f"]));
        assert!(!prefix_viable_texts(&["not a token"]));
    }
}
