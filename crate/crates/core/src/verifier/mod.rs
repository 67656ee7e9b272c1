//! Security-property checking: a bounded Dolev-Yao engine and an adapter for
//! an external ProVerif binary.

mod engine;
mod external;
mod knowledge;
mod lookahead;
mod program;
mod term;
mod verdict;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use engine::{Bounds, Goal, SearchOutcome};
pub use external::{parse_results, run_external};
pub use knowledge::{derivation_steps, saturate, Derivation, Knowledge, DEFAULT_TERM_DEPTH};
pub use term::{match_term, unify, Rule, Signature, Subst, Term, ATTACKER_LABEL};
pub use verdict::{AttackTrace, Choice, EngineKind, TraceAction, TraceStep, Verdict, VerdictStatus};

use crate::pvlang::{inject_queries, InjectError, PiModel, QueryKind, QuerySpec};
use engine::Machine;
use program::Program;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("external verifier not found at {0}")]
    ExternalToolNotFound(String),
    #[error("could not parse external verifier output")]
    ExternalParseError { raw_output: String, stderr: String },
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineMode {
    #[default]
    Builtin,
    External,
    Both,
}

impl std::str::FromStr for EngineMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "builtin" => Ok(EngineMode::Builtin),
            "external" => Ok(EngineMode::External),
            "both" => Ok(EngineMode::Both),
            other => Err(format!("unknown engine `{other}` (builtin|external|both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifierConfig {
    pub engine: EngineMode,
    pub external_path: Option<PathBuf>,
    /// Use the builtin engine when the external tool fails.
    pub fallback: bool,
    pub session_bound: usize,
    pub term_depth: usize,
    pub state_cap: usize,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        let b = Bounds::default();
        VerifierConfig {
            engine: EngineMode::Builtin,
            external_path: None,
            fallback: true,
            session_bound: b.session_bound,
            term_depth: b.term_depth,
            state_cap: b.state_cap,
        }
    }
}

impl VerifierConfig {
    pub fn bounds(&self) -> Bounds {
        Bounds {
            session_bound: self.session_bound.max(1),
            term_depth: self.term_depth.max(1),
            state_cap: self.state_cap.max(1),
        }
    }
}

fn goal_for(prog: &Program, model: &PiModel, query: &QuerySpec, bounds: Bounds) -> Result<Goal, String> {
    match query {
        QuerySpec::Secrecy { target } => {
            prog.eval(target, &Vec::new()).map(Goal::Secrecy).ok_or_else(|| "secrecy target does not evaluate".into())
        }
        QuerySpec::Correspondence { end, begin, .. } => {
            Ok(Goal::Correspondence { end: Arc::from(end.as_str()), begin: Arc::from(begin.as_str()) })
        }
        QuerySpec::Freshness { accept, .. } => {
            if model.event_decl(accept).is_none() || !model.main_process.emitted_events().contains(&accept.as_str()) {
                return Err(format!("no `{accept}` event to watch"));
            }
            let sessions = bounds.session_bound.clamp(2, u8::MAX as usize) as u8;
            Ok(Goal::Freshness { accept: Arc::from(accept.as_str()), sessions })
        }
    }
}

/// Checks one query with the builtin engine.
pub fn check_query(model: &PiModel, query: &QuerySpec, bounds: Bounds) -> Verdict {
    let prog = Program::compile(model);
    let goal = match goal_for(&prog, model, query, bounds) {
        Ok(g) => g,
        Err(reason) => {
            let mut v = Verdict::not_applicable(query.kind(), reason);
            v.query = Some(query.clone());
            return v;
        }
    };
    let machine = Machine::new(&prog, &goal, bounds);
    let outcome = machine.search();
    let trace = (outcome.status == VerdictStatus::Violated).then(|| {
        let (steps, violated) = machine.replay(&outcome.schedule);
        debug_assert!(violated, "schedule must reproduce the violation");
        AttackTrace { steps, schedule: outcome.schedule.clone() }
    });
    tracing::debug!(query = %query.label(), status = outcome.status.as_str(), states = outcome.states, "checked");
    Verdict {
        kind: query.kind(),
        query: Some(query.clone()),
        status: outcome.status,
        vacuous: outcome.vacuous,
        trace,
        engine: EngineKind::Builtin,
        warnings: outcome.warnings,
        cross_check: None,
        states_explored: outcome.states,
    }
}

pub fn check_secrecy(model: &PiModel, target: &crate::pvlang::Term, session_bound: usize) -> Verdict {
    let q = QuerySpec::Secrecy { target: target.clone() };
    check_query(model, &q, Bounds { session_bound, ..Bounds::default() })
}

pub fn check_correspondence(model: &PiModel, end: &str, begin: &str, session_bound: usize) -> Verdict {
    let arity = model.event_decl(end).map_or(0, |a| a.len());
    let vars = (0..arity).map(|i| (format!("x{i}"), "bitstring".to_string())).collect();
    let q = QuerySpec::Correspondence { vars, end: end.into(), begin: begin.into() };
    check_query(model, &q, Bounds { session_bound, ..Bounds::default() })
}

pub fn check_freshness(model: &PiModel, accept: &str, session_bound: usize) -> Verdict {
    let q = QuerySpec::Freshness { accept: accept.into(), nonce: None };
    check_query(model, &q, Bounds { session_bound, ..Bounds::default() })
}

/// Re-executes a schedule from a trace; returns the logged steps and
/// whether the query is violated at the end.
pub fn replay(model: &PiModel, query: &QuerySpec, bounds: Bounds, schedule: &[Choice]) -> (Vec<TraceStep>, bool) {
    let prog = Program::compile(model);
    match goal_for(&prog, model, query, bounds) {
        Ok(goal) => Machine::new(&prog, &goal, bounds).replay(schedule),
        Err(_) => (Vec::new(), false),
    }
}

/// One verdict (or error) per query, in query order.
pub fn verify_model(model: &PiModel, config: &VerifierConfig) -> Vec<Result<Verdict, VerifyError>> {
    let bounds = config.bounds();
    let builtin = |q: &QuerySpec| check_query(model, q, bounds);
    let external = match (config.engine, &config.external_path) {
        (EngineMode::Builtin, _) => None,
        (_, Some(path)) => Some(run_external(model, path)),
        (_, None) => Some(Err(VerifyError::ExternalToolNotFound("<unset>".into()))),
    };
    let mut ext_iter = match &external {
        Some(Ok(vs)) => vs.clone().into_iter(),
        _ => Vec::new().into_iter(),
    };
    model
        .queries
        .iter()
        .map(|q| {
            // freshness is only expressible to the builtin engine
            if q.kind() == QueryKind::Freshness {
                return Ok(builtin(q));
            }
            match (&external, config.engine) {
                (None, _) => Ok(builtin(q)),
                (Some(Ok(_)), EngineMode::External) => Ok(ext_iter.next().expect("one result per query")),
                (Some(Ok(_)), _) => {
                    let ext = ext_iter.next().expect("one result per query");
                    let mut v = builtin(q);
                    v.cross_check = Some(ext.status == v.status);
                    Ok(v)
                }
                (Some(Err(e)), EngineMode::Both) => {
                    let mut v = builtin(q);
                    v.warnings.push(format!("external cross-check unavailable: {e}"));
                    Ok(v)
                }
                (Some(Err(e)), _) if config.fallback => {
                    let mut v = builtin(q);
                    v.warnings.push(format!("external verifier failed ({e}); used builtin engine"));
                    Ok(v)
                }
                (Some(Err(e)), _) => Err(e.clone()),
            }
        })
        .collect()
}

/// Verdicts for the requested property kinds. Kinds the model offers no
/// target for come back as not-applicable.
pub fn verify_features(model: &PiModel, kinds: &BTreeSet<QueryKind>, config: &VerifierConfig) -> Vec<Verdict> {
    kinds
        .iter()
        .map(|&kind| {
            let existing = model.queries.iter().find(|q| q.kind() == kind).cloned();
            let query = match existing {
                Some(q) => q,
                None => match inject_queries(&PiModel { queries: Vec::new(), ..model.clone() }, &[kind].into()) {
                    Ok(m) => m.queries.into_iter().next().expect("one injected query"),
                    Err(InjectError::MissingQueryTarget(k)) => {
                        return Verdict::not_applicable(k, format!("model has no {k} target"));
                    }
                },
            };
            let single = PiModel { queries: vec![query], ..model.clone() };
            match verify_model(&single, config).pop().expect("one query") {
                Ok(v) => v,
                Err(e) => {
                    let mut v = Verdict::not_applicable(kind, e.to_string());
                    v.status = VerdictStatus::Unknown;
                    v
                }
            }
        })
        .collect()
}
