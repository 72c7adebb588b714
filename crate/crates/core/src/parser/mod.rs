//! Tokenizer and parser for the supported Prolog subset.
//!
//! Supported: facts, rules, conjunction, `\+`, `is`, `=`, `==`, `\==`, the
//! arithmetic comparisons, `+ - * /`, unary minus, parentheses, integer and
//! decimal literals, `%` and `/* */` comments. A `% id: <identifier>` comment
//! attaches a provenance identifier to the clause that follows it. Cut,
//! disjunction, lists, strings and database updates are rejected with a
//! diagnostic.

mod lexer;
mod syntax;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::clause::{Goal, KnowledgeBase};

pub use lexer::{tokenize, Token, TokenKind};
pub use syntax::{parse_program, parse_query, parse_term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagnosticKind {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub kind: DiagnosticKind,
}

impl ParseDiagnostic {
    pub(crate) fn error(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseDiagnostic { line, column, message: message.into(), kind: DiagnosticKind::Error }
    }

    pub(crate) fn warning(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseDiagnostic { line, column, message: message.into(), kind: DiagnosticKind::Warning }
    }

    pub fn is_error(&self) -> bool {
        self.kind == DiagnosticKind::Error
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            DiagnosticKind::Error => "error",
            DiagnosticKind::Warning => "warning",
        };
        write!(f, "{}:{}: {kind}: {}", self.line, self.column, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceProgram {
    pub text: String,
    /// File path or instance identifier.
    pub origin: String,
}

impl SourceProgram {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> Self {
        SourceProgram { text: text.into(), origin: origin.into() }
    }
}

/// A parsed program: the clauses, any `?- goal.` queries embedded in the
/// text, and non-fatal warnings.
#[derive(Clone, Debug)]
pub struct Program {
    pub kb: KnowledgeBase,
    pub queries: Vec<Vec<Goal>>,
    pub warnings: Vec<ParseDiagnostic>,
}

/// Renders a query the way `parse_query` accepts it.
pub fn render_query(goals: &[Goal]) -> String {
    let body: Vec<String> = goals.iter().map(|g| g.to_string()).collect();
    format!("?- {}.", body.join(", "))
}
