//! Lexer, parser, AST and pretty-printer for flow/modifier sources.
//!
//! The grammar is line-oriented in spirit but newlines carry no meaning:
//! every statement starts with an identifier followed by `:` (stream
//! declaration) or `(` (call), so statements are delimited by their first
//! tokens. `%` starts a comment and lines made only of `*` are banners.

pub mod ast;
mod lexer;
mod parser;
mod printer;
mod validate;

use std::fmt;

use thiserror::Error;

pub use ast::SourceUnit;
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse_unit;
pub use printer::pretty_print;
pub use validate::{validate_unit, Diagnostic, DiagnosticKind, Severity};

/// 1-based line and column.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
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

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {message}")]
pub struct SyntaxError {
    pub span: Span,
    pub message: String,
}

impl SyntaxError {
    pub fn new(span: Span, message: impl Into<String>) -> Self {
        SyntaxError {
            span,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{span}: `{name}` is defined more than once")]
    DuplicateName { name: String, span: Span },
    #[error("{span}: guarded block in `{modifier}` has no final TRUE arm")]
    MissingTrueArm { modifier: String, span: Span },
}

impl ParseError {
    pub fn span(&self) -> Span {
        match self {
            ParseError::Syntax(e) => e.span,
            ParseError::DuplicateName { span, .. } | ParseError::MissingTrueArm { span, .. } => {
                *span
            }
        }
    }
}

/// Tokenizes and parses one source text.
pub fn parse_source(text: &str) -> Result<SourceUnit, ParseError> {
    let tokens = tokenize(text)?;
    parse_unit(&tokens)
}

pub(crate) fn parse_expr_str(text: &str) -> Result<crate::model::Expr, SyntaxError> {
    let tokens = tokenize(text)?;
    parser::parse_expr_tokens(&tokens)
}
