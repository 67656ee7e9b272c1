use serde::{Deserialize, Serialize};

use super::program::NodeId;
use super::term::Term;
use crate::pvlang::{QueryKind, QuerySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Holds,
    Violated,
    /// The explored-state budget ran out before a decision.
    Unknown,
    /// The model has nothing for this query kind to talk about.
    NotApplicable,
}

impl VerdictStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictStatus::Holds => "holds",
            VerdictStatus::Violated => "violated",
            VerdictStatus::Unknown => "unknown",
            VerdictStatus::NotApplicable => "not-applicable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Builtin,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceAction {
    In,
    Out,
    Event,
    Deduce,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub session_id: usize,
    pub action: TraceAction,
    pub term: String,
    pub justification: String,
}

/// Scheduling decision; the silent steps between decisions are determined.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Choice {
    Input { path: Vec<u8>, node: NodeId, msg: Term },
    Begin { path: Vec<u8>, node: NodeId },
    Sync { out: (Vec<u8>, NodeId), inp: (Vec<u8>, NodeId) },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackTrace {
    pub steps: Vec<TraceStep>,
    /// Decisions that reproduce the run; see [`super::replay`].
    #[serde(skip)]
    pub schedule: Vec<Choice>,
}

impl AttackTrace {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.steps.iter().enumerate() {
            let action = match s.action {
                TraceAction::In => "in",
                TraceAction::Out => "out",
                TraceAction::Event => "event",
                TraceAction::Deduce => "deduce",
            };
            out.push_str(&format!("{:>3}. [s{}] {action} {}  -- {}\n", i + 1, s.session_id, s.term, s.justification));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: QueryKind,
    pub query: Option<QuerySpec>,
    pub status: VerdictStatus,
    /// Correspondence held only because no end event was ever reached.
    pub vacuous: bool,
    pub trace: Option<AttackTrace>,
    pub engine: EngineKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// In dual-engine mode: whether the external tool agreed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<bool>,
    pub states_explored: usize,
}

impl Verdict {
    pub fn holds(&self) -> bool {
        self.status == VerdictStatus::Holds
    }

    pub fn not_applicable(kind: QueryKind, reason: impl Into<String>) -> Self {
        Verdict {
            kind,
            query: None,
            status: VerdictStatus::NotApplicable,
            vacuous: false,
            trace: None,
            engine: EngineKind::Builtin,
            warnings: vec![reason.into()],
            cross_check: None,
            states_explored: 0,
        }
    }
}
