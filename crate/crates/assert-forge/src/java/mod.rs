//! Lightweight Java front end: a lexer, a structural parser that extracts
//! classes, methods, statements, and method invocations, and a strict
//! statement validator used for syntax checking generated asserts.
//!
//! This is not a full Java compiler front end. It understands the subset
//! needed to mine unit tests: declaration structure, statement boundaries,
//! expression syntax, and invocation order.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod syntax;

pub use ast::{
    BlockStmt, CompilationUnit, Invocation, JavaMethod, ParsedClass, Span, Stmt, StmtKind,
};
pub use lexer::{lex, Token, TokenKind};
pub use parser::{parse_compilation_unit, parse_method_source};
pub use syntax::statement_is_valid;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum JavaError {
    #[error("lex error at byte {offset}: {message}")]
    Lex { offset: usize, message: String },
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unbalanced delimiter: {0}")]
    Unbalanced(String),
}
