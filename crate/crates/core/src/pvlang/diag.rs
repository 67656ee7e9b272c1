use std::fmt;

use serde::{Deserialize, Serialize};

/// Stable diagnostic codes; the repair loop keys knowledge-base retrieval on
/// these strings, so they must not change. See `docs/diagnostics.md`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiagCode {
    #[serde(rename = "E_SYNTAX")]
    Syntax,
    #[serde(rename = "E_UNDECLARED")]
    Undeclared,
    #[serde(rename = "E_UNDECLARED_TYPE")]
    UndeclaredType,
    #[serde(rename = "E_UNDECLARED_EVENT")]
    UndeclaredEvent,
    #[serde(rename = "E_QUERY_UNDECLARED_EVENT")]
    QueryUndeclaredEvent,
    #[serde(rename = "E_ARITY")]
    Arity,
    #[serde(rename = "E_MISSING_ELSE")]
    MissingElse,
    #[serde(rename = "E_DUPLICATE_DECL")]
    DuplicateDecl,
    #[serde(rename = "E_NOT_CHANNEL")]
    NotChannel,
    #[serde(rename = "E_BAD_REDUC")]
    BadReduc,
    #[serde(rename = "E_DESTRUCTOR_MISUSE")]
    DestructorMisuse,
}

impl DiagCode {
    pub const ALL: [DiagCode; 11] = [
        DiagCode::Syntax,
        DiagCode::Undeclared,
        DiagCode::UndeclaredType,
        DiagCode::UndeclaredEvent,
        DiagCode::QueryUndeclaredEvent,
        DiagCode::Arity,
        DiagCode::MissingElse,
        DiagCode::DuplicateDecl,
        DiagCode::NotChannel,
        DiagCode::BadReduc,
        DiagCode::DestructorMisuse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DiagCode::Syntax => "E_SYNTAX",
            DiagCode::Undeclared => "E_UNDECLARED",
            DiagCode::UndeclaredType => "E_UNDECLARED_TYPE",
            DiagCode::UndeclaredEvent => "E_UNDECLARED_EVENT",
            DiagCode::QueryUndeclaredEvent => "E_QUERY_UNDECLARED_EVENT",
            DiagCode::Arity => "E_ARITY",
            DiagCode::MissingElse => "E_MISSING_ELSE",
            DiagCode::DuplicateDecl => "E_DUPLICATE_DECL",
            DiagCode::NotChannel => "E_NOT_CHANNEL",
            DiagCode::BadReduc => "E_BAD_REDUC",
            DiagCode::DestructorMisuse => "E_DESTRUCTOR_MISUSE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for DiagCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a syntax error happened and what the parser wanted instead.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxTrace {
    pub line: usize,
    pub column: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl SyntaxTrace {
    pub fn new(line: usize, column: usize, expected: Vec<String>, found: &str) -> Self {
        SyntaxTrace { line, column, expected, found: found.to_string() }
    }
}

impl fmt::Display for SyntaxTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: found {:?}", self.line, self.column, self.found)?;
        if !self.expected.is_empty() {
            write!(f, ", expected one of [{}]", self.expected.join(", "))?;
        }
        Ok(())
    }
}

/// Machine-readable validation finding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: DiagCode,
    pub message: String,
    /// Identifier the finding is about, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    /// `(line, column)` when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_arity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub found_arity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub syntax: Option<SyntaxTrace>,
}

impl Diagnostic {
    pub fn new(code: DiagCode, message: impl Into<String>) -> Self {
        Diagnostic {
            code,
            message: message.into(),
            subject: None,
            location: None,
            expected_arity: None,
            found_arity: None,
            syntax: None,
        }
    }

    pub fn about(mut self, subject: impl Into<String>) -> Self {
        self.subject = Some(subject.into());
        self
    }

    pub fn arity(mut self, expected: usize, found: usize) -> Self {
        self.expected_arity = Some(expected);
        self.found_arity = Some(found);
        self
    }

    pub fn from_syntax(trace: SyntaxTrace) -> Self {
        let mut d = Diagnostic::new(DiagCode::Syntax, format!("syntax error at {trace}"));
        d.location = Some((trace.line, trace.column));
        d.syntax = Some(trace);
        d
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.code, self.message)
    }
}
