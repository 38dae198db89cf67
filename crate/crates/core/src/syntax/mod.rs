//! Lexing and parsing of the supported JavaScript subset.

pub mod ast;
pub mod lexer;
pub mod parser;

pub use ast::{BranchKind, Expr, ExprKind, Function, Program, SourceAnchor, Stmt, StmtKind};
pub use lexer::{decode_source, tokenize, LexError, Token, TokenKind};
pub use parser::{parse, SyntaxError};

/// Unit name for code produced at runtime by `parent` (eval, timers, written scripts).
pub fn dynamic_unit_name(parent: &str, offset: usize, counter: usize) -> String {
    format!("{parent}:eval@{offset}#{counter}")
}

/// Number of dynamic-code generations between `unit_name` and its root script.
pub fn dynamic_depth(unit_name: &str) -> usize {
    unit_name.matches(":eval@").count()
}
