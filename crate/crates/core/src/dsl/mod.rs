//! Textual `.hbg` modeling language.
//!
//! ```text
//! bondgraph one_tank {
//!   element Sf Sf1 { value = 1.0 }
//!   element C C1 { value = 1.0 }
//!   element R R1 { value = 1.0 }
//!   junction 0 j
//!   junction 1 drain switched { on_guard = (effort(C1) >= 0.2); off_guard = (effort(C1) < 0.2); init = off }
//!   bond b1 from Sf1 to j
//!   bond b2 from j to C1
//!   bond b3 from j to drain
//!   bond b4 from drain to R1
//!   probe h = effort(C1)
//! }
//! ```
//!
//! `#` starts a line comment. Items may end with an optional `;`.
//! [`serialize_model`] writes the canonical form: one item per line, two-space
//! indentation, fully parenthesized expressions, shortest round-trip numbers.

mod lexer;
mod parser;
mod serialize;

use std::fmt;

pub use parser::parse_model;
pub use serialize::serialize_model;

use crate::validate::DiagnosticKind;

/// Words that cannot be used as names.
pub const KEYWORDS: &[&str] = &[
    "bondgraph",
    "element",
    "junction",
    "bond",
    "from",
    "to",
    "switched",
    "on_guard",
    "off_guard",
    "init",
    "on",
    "off",
    "signal",
    "piecewise",
    "decision",
    "probe",
    "value",
    "and",
    "or",
    "not",
    "true",
    "false",
    "time",
    "effort",
    "flow",
];

/// `[A-Za-z_][A-Za-z0-9_]*`, excluding keywords.
pub fn is_valid_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !KEYWORDS.contains(&s)
}

/// Location in model source. `line` and `column` are 1-based and count
/// characters; `length` is in characters; `offset` is the byte offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
    pub offset: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownKeyword,
    DuplicateName,
    TypeMismatch,
    UnresolvedReference,
    /// Any other structural invariant reported by validation.
    Invalid(DiagnosticKind),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub span: SourceSpan,
    pub kind: ParseErrorKind,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(kind: ParseErrorKind, span: SourceSpan, message: String) -> Self {
        ParseError { span, kind, message }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

impl std::error::Error for ParseError {}
