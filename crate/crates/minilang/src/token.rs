//! Tokens and the lexer.

use std::fmt;

use crate::error::ParseError;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TokenKind {
    Ident,
    Int,
    // keywords
    Fn,
    Let,
    If,
    Else,
    While,
    Return,
    True,
    False,
    // symbols
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    AndAnd,
    OrOr,
    Bang,
}

const KEYWORDS: [(&str, TokenKind); 8] = [
    ("fn", TokenKind::Fn),
    ("let", TokenKind::Let),
    ("if", TokenKind::If),
    ("else", TokenKind::Else),
    ("while", TokenKind::While),
    ("return", TokenKind::Return),
    ("true", TokenKind::True),
    ("false", TokenKind::False),
];

const SYMBOLS: [(&str, TokenKind); 21] = [
    ("(", TokenKind::LParen),
    (")", TokenKind::RParen),
    ("{", TokenKind::LBrace),
    ("}", TokenKind::RBrace),
    (",", TokenKind::Comma),
    (";", TokenKind::Semi),
    ("=", TokenKind::Assign),
    ("==", TokenKind::EqEq),
    ("!=", TokenKind::NotEq),
    ("<", TokenKind::Lt),
    ("<=", TokenKind::Le),
    (">", TokenKind::Gt),
    (">=", TokenKind::Ge),
    ("+", TokenKind::Plus),
    ("-", TokenKind::Minus),
    ("*", TokenKind::Star),
    ("/", TokenKind::Slash),
    ("%", TokenKind::Percent),
    ("&&", TokenKind::AndAnd),
    ("||", TokenKind::OrOr),
    ("!", TokenKind::Bang),
];

impl TokenKind {
    /// Every keyword and symbol kind with its fixed spelling.
    pub fn fixed() -> impl Iterator<Item = (&'static str, TokenKind)> {
        KEYWORDS.iter().chain(SYMBOLS.iter()).copied()
    }

    pub fn keyword(text: &str) -> Option<TokenKind> {
        KEYWORDS.iter().find(|(k, _)| *k == text).map(|(_, t)| *t)
    }

    pub fn is_keyword(text: &str) -> bool {
        Self::keyword(text).is_some()
    }

    /// Fixed spelling for keyword/symbol kinds, a class name otherwise.
    pub fn describe(self) -> &'static str {
        match self {
            TokenKind::Ident => "IDENT",
            TokenKind::Int => "INT",
            other => Self::fixed().find(|(_, k)| *k == other).map(|(s, _)| s).unwrap_or("?"),
        }
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.describe())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub span: Span,
}

impl Token {
    pub fn new(kind: TokenKind, text: impl Into<String>, span: Span) -> Self {
        Token {
            kind,
            text: text.into(),
            span,
        }
    }

    /// Classifies a single lexeme. Returns `None` unless `text` lexes to
    /// exactly one token.
    pub fn from_text(text: &str) -> Option<Token> {
        let mut toks = lex(text).ok()?;
        if toks.len() == 1 {
            toks.pop()
        } else {
            None
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

pub fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Whether `s` is a syntactically valid, non-keyword identifier.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if is_ident_start(c)) && chars.all(is_ident_continue) && !TokenKind::is_keyword(s)
}

/// Splits source text into tokens. `//` starts a line comment.
///
/// Integer literals are read modulo 2^64 as two's-complement, so every `i64`
/// has a digit spelling; digit strings above `u64::MAX` are rejected.
pub fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let c = chars[i];
        let span = Span::new(line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if is_ident_start(c) {
            while i < chars.len() && is_ident_continue(chars[i]) {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let kind = TokenKind::keyword(&text).unwrap_or(TokenKind::Ident);
            out.push(Token::new(kind, text, span));
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && is_ident_start(chars[i]) {
                return Err(ParseError::Lex {
                    span,
                    message: "identifier cannot start with a digit".into(),
                });
            }
            let text: String = chars[start..i].iter().collect();
            if text.parse::<u64>().is_err() {
                return Err(ParseError::Lex {
                    span,
                    message: format!("integer literal `{text}` out of range"),
                });
            }
            out.push(Token::new(TokenKind::Int, text, span));
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let sym = SYMBOLS
                .iter()
                .find(|(s, _)| s.len() == 2 && *s == two)
                .or_else(|| SYMBOLS.iter().find(|(s, _)| s.len() == 1 && s.starts_with(c)));
            match sym {
                Some((s, kind)) => {
                    i += s.len();
                    out.push(Token::new(*kind, *s, span));
                }
                None => {
                    return Err(ParseError::Lex {
                        span,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            }
        }
        col += (i - start) as u32;
    }
    Ok(out)
}

/// Value of an INT token, read modulo 2^64.
pub fn int_value(text: &str) -> Option<i64> {
    text.parse::<u64>().ok().map(|v| v as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_operators_greedily() {
        let toks = lex("a<=b==c&&!d||e!=f").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.kind).collect();
        use TokenKind::*;
        assert_eq!(
            kinds,
            vec![Ident, Le, Ident, EqEq, Ident, AndAnd, Bang, Ident, OrOr, Ident, NotEq, Ident]
        );
    }

    #[test]
    fn spans_are_one_based() {
        let toks = lex("fn f() {\n  return 1;\n}").unwrap();
        assert_eq!(toks[0].span, Span::new(1, 1));
        let ret = toks.iter().find(|t| t.kind == TokenKind::Return).unwrap();
        assert_eq!(ret.span, Span::new(2, 3));
    }

    #[test]
    fn keywords_are_not_identifiers() {
        assert!(!is_identifier("while"));
        assert!(is_identifier("while_"));
        assert!(is_identifier("_x9"));
        assert!(!is_identifier("9x"));
    }

    #[test]
    fn int_literals_wrap_into_i64() {
        assert_eq!(int_value("9223372036854775808"), Some(i64::MIN));
        assert!(lex("18446744073709551616").is_err());
        assert!(lex("12ab").is_err());
    }

    #[test]
    fn comments_and_bad_characters() {
        assert_eq!(lex("// nothing\n").unwrap().len(), 0);
        assert!(matches!(lex("a # b"), Err(ParseError::Lex { .. })));
        assert!(lex("a & b").is_err());
    }
}
