use std::collections::BTreeSet;

use thiserror::Error;

use super::ast::{Decl, PiModel, QueryKind, QuerySpec, Term};

pub const ACCEPT_EVENT: &str = "accept";
pub const BEGIN_AUTH: &str = "begin_auth";
pub const END_AUTH: &str = "end_auth";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InjectError {
    #[error("model has nothing to attach a {0} query to")]
    MissingQueryTarget(QueryKind),
}

/// Adds one query per requested kind, skipping kinds the model already
/// queries. Secrecy targets the first private free name that is neither a
/// key nor a channel; freshness watches the `accept` event; authentication
/// pairs `end_auth` with `begin_auth`.
pub fn inject_queries(model: &PiModel, kinds: &BTreeSet<QueryKind>) -> Result<PiModel, InjectError> {
    let mut out = model.clone();
    for &kind in kinds {
        if out.queries.iter().any(|q| q.kind() == kind) {
            continue;
        }
        let q = match kind {
            QueryKind::Secrecy => secrecy_target(model).map(|t| QuerySpec::Secrecy { target: Term::ident(t) }),
            QueryKind::Freshness => model.event_decl(ACCEPT_EVENT).map(|_| QuerySpec::Freshness {
                accept: ACCEPT_EVENT.to_string(),
                nonce: model.main_process.new_names().first().map(|n| n.to_string()),
            }),
            QueryKind::Correspondence => match (model.event_decl(END_AUTH), model.event_decl(BEGIN_AUTH)) {
                (Some(e), Some(b)) if e.len() == b.len() => {
                    let vars = e
                        .iter()
                        .enumerate()
                        .map(|(i, t)| (if e.len() == 1 { "x".to_string() } else { format!("x{}", i + 1) }, t.clone()))
                        .collect();
                    Some(QuerySpec::Correspondence { vars, end: END_AUTH.into(), begin: BEGIN_AUTH.into() })
                }
                _ => None,
            },
        };
        out.queries.push(q.ok_or(InjectError::MissingQueryTarget(kind))?);
    }
    Ok(out)
}

fn secrecy_target(model: &PiModel) -> Option<&str> {
    let private: Vec<(&str, &str)> = model
        .declarations
        .iter()
        .filter_map(|d| match d {
            Decl::Free { name, ty, private: true } if ty != "channel" => Some((name.as_str(), ty.as_str())),
            _ => None,
        })
        .collect();
    private.iter().find(|(_, ty)| *ty != "key").or(private.first()).map(|(n, _)| *n)
}
