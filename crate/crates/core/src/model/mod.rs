//! Shared symbol table, integer expressions and time units.

mod expr;
mod symbols;

pub use expr::{BinOp, Expr, Rel, Value};
pub use symbols::{is_identifier, Layered, Provenance, Scope, SymbolEntry, SymbolTable};

use thiserror::Error;

/// Abstract clock ticks; the only time unit accepted.
pub type Clock = u64;

pub const CLOCK_UNIT: &str = "clock";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow while evaluating expression")]
    Overflow,
    #[error("`{name}` bound to {old} by {old_provenance} and to {new} by {new_provenance}")]
    ConflictingBinding {
        name: String,
        old: i64,
        new: i64,
        old_provenance: String,
        new_provenance: String,
    },
    #[error("`{0}` is not a valid identifier")]
    InvalidIdentifier(String),
    #[error("expected an arithmetic expression, found a comparison")]
    ExpectedInteger,
    #[error("expected a comparison, found an arithmetic expression")]
    ExpectedBoolean,
    #[error("cannot parse expression `{text}`: {reason}")]
    Parse { text: String, reason: String },
}
