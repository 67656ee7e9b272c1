//! The model language: a small applied pi-calculus dialect that real
//! ProVerif accepts, plus a freshness pragma hidden in a comment.

mod ast;
mod diag;
mod inject;
mod lexer;
mod parser;
mod render;
mod validate;

use std::collections::BTreeMap;

use thiserror::Error;

pub use ast::{Decl, DeclKind, PiModel, Process, QueryKind, QuerySpec, Term};
pub use diag::{DiagCode, Diagnostic, SyntaxTrace};
pub use inject::{inject_queries, InjectError, ACCEPT_EVENT, BEGIN_AUTH, END_AUTH};
pub use render::{render, render_decl, render_inline, render_query, render_term};
pub use validate::{validate, BUILTIN_TYPES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {0}")]
    Syntax(SyntaxTrace),
    #[error("undeclared identifier `{name}`{}", fmt_loc(*.location))]
    UndeclaredIdentifier { name: String, location: Option<(usize, usize)> },
    #[error("`{name}` expects {expected} argument(s), got {got}")]
    ArityMismatch { name: String, expected: usize, got: usize },
}

fn fmt_loc(loc: Option<(usize, usize)>) -> String {
    loc.map(|(l, c)| format!(" at {l}:{c}")).unwrap_or_default()
}

/// First `(line, column)` at which each identifier occurs in the source.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceMap(BTreeMap<String, (usize, usize)>);

impl SourceMap {
    pub fn first_use(&self, ident: &str) -> Option<(usize, usize)> {
        self.0.get(ident).copied()
    }
}

/// Parses without running static checks.
pub fn parse_unchecked(src: &str) -> Result<(PiModel, SourceMap), SyntaxTrace> {
    let model = parser::parse(src)?;
    let mut map = BTreeMap::new();
    for t in lexer::lex(src)? {
        if let lexer::Tok::Ident(s) = t.tok {
            map.entry(s).or_insert((t.line, t.col));
        }
    }
    Ok((model, SourceMap(map)))
}

/// Strict parse: syntax, name resolution and arity must all be right. Other
/// findings (missing else, misuse of destructors, ...) are left to
/// [`validate`].
pub fn parse_model(src: &str) -> Result<PiModel, ParseError> {
    let (model, map) = parse_unchecked(src).map_err(ParseError::Syntax)?;
    for d in validate(&model) {
        let name = d.subject.clone().unwrap_or_default();
        match d.code {
            DiagCode::Undeclared => {
                return Err(ParseError::UndeclaredIdentifier { location: map.first_use(&name), name });
            }
            DiagCode::Arity => {
                return Err(ParseError::ArityMismatch {
                    name,
                    expected: d.expected_arity.unwrap_or_default(),
                    got: d.found_arity.unwrap_or_default(),
                });
            }
            _ => {}
        }
    }
    Ok(model)
}

/// Every finding for `src`, located where possible: a single syntax
/// diagnostic if it does not parse, otherwise the validation list.
pub fn diagnose(src: &str) -> Vec<Diagnostic> {
    match parse_unchecked(src) {
        Err(trace) => vec![Diagnostic::from_syntax(trace)],
        Ok((model, map)) => validate(&model)
            .into_iter()
            .map(|mut d| {
                if d.location.is_none() {
                    d.location = d.subject.as_deref().and_then(|s| map.first_use(s));
                }
                d
            })
            .collect(),
    }
}

/// Parse and validate in one go; `Ok` only for a model with no findings.
pub fn parse_valid(src: &str) -> Result<PiModel, Vec<Diagnostic>> {
    let diags = diagnose(src);
    if !diags.is_empty() {
        return Err(diags);
    }
    Ok(parse_unchecked(src).expect("diagnose accepted the source").0)
}
