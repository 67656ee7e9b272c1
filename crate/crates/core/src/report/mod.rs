//! Verdicts to feature profiles, profiles to attacks, and per-app reports.

mod aggregate;
mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aggregate::{
    aggregate_corpus, combination_order, evolution, percent_of, AttackRow, ComboRow, CorpusStats, Dimension,
    EvolutionRow, GroupStats, Percent, RATING_INTERVALS,
};
pub use render::{render_combinations, render_evolution, render_groups};

use crate::ingest::{AppPackage, DownloadsBucket};
use crate::pvlang::QueryKind;
use crate::translator::{TranslationOutcome, TranslationSession};
use crate::verifier::{Verdict, VerdictStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Encryption,
    Nonce,
    Authentication,
}

impl Feature {
    pub const ALL: [Feature; 3] = [Feature::Encryption, Feature::Nonce, Feature::Authentication];

    pub fn query_kind(self) -> QueryKind {
        match self {
            Feature::Encryption => QueryKind::Secrecy,
            Feature::Nonce => QueryKind::Freshness,
            Feature::Authentication => QueryKind::Correspondence,
        }
    }

    pub fn from_query_kind(k: QueryKind) -> Self {
        match k {
            QueryKind::Secrecy => Feature::Encryption,
            QueryKind::Freshness => Feature::Nonce,
            QueryKind::Correspondence => Feature::Authentication,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::Encryption => "encryption",
            Feature::Nonce => "nonce",
            Feature::Authentication => "authentication",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "encryption" | "enc" => Some(Feature::Encryption),
            "nonce" | "freshness" | "randomness" => Some(Feature::Nonce),
            "authentication" | "auth" => Some(Feature::Authentication),
            _ => None,
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a feature's value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// A definite verdict, holds or violated.
    Verified,
    /// Correspondence held only because no end event was reachable.
    Vacuous,
    NotApplicable,
    /// Budget exhausted, engine error, or the pipeline never got this far.
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureProvenance {
    pub encryption: Provenance,
    pub nonce: Provenance,
    pub authentication: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureProfile {
    pub encryption: bool,
    pub nonce: bool,
    pub authentication: bool,
    pub provenance: FeatureProvenance,
}

impl FeatureProfile {
    /// Profile with the given values, all marked verified.
    pub fn verified(encryption: bool, nonce: bool, authentication: bool) -> Self {
        FeatureProfile {
            encryption,
            nonce,
            authentication,
            provenance: FeatureProvenance {
                encryption: Provenance::Verified,
                nonce: Provenance::Verified,
                authentication: Provenance::Verified,
            },
        }
    }

    /// All features absent, provenance unknown.
    pub fn unknown() -> Self {
        let mut p = Self::verified(false, false, false);
        p.provenance = FeatureProvenance {
            encryption: Provenance::Unknown,
            nonce: Provenance::Unknown,
            authentication: Provenance::Unknown,
        };
        p
    }

    pub fn has(&self, f: Feature) -> bool {
        match f {
            Feature::Encryption => self.encryption,
            Feature::Nonce => self.nonce,
            Feature::Authentication => self.authentication,
        }
    }

    pub fn provenance_of(&self, f: Feature) -> Provenance {
        match f {
            Feature::Encryption => self.provenance.encryption,
            Feature::Nonce => self.provenance.nonce,
            Feature::Authentication => self.provenance.authentication,
        }
    }

    pub fn is_secure(&self) -> bool {
        self.encryption && self.nonce && self.authentication
    }

    /// `(encryption, nonce, authentication)`.
    pub fn combination(&self) -> (bool, bool, bool) {
        (self.encryption, self.nonce, self.authentication)
    }

    /// Three letters, e.g. `TFT`.
    pub fn code(&self) -> String {
        [self.encryption, self.nonce, self.authentication].iter().map(|b| if *b { 'T' } else { 'F' }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("more than one {0} verdict")]
    DuplicateFeatureVerdict(QueryKind),
    #[error("no reports to aggregate")]
    EmptyCorpus,
    #[error("unknown attack `{0}` in matrix")]
    UnknownAttack(String),
    #[error("unknown feature `{0}` in matrix")]
    UnknownFeature(String),
    #[error("matrix never uses feature `{0}`, so a profile missing it would read as secure")]
    FeatureUnused(Feature),
}

pub fn derive_profile(verdicts: &[Verdict]) -> Result<FeatureProfile, ReportError> {
    let mut by_kind: BTreeMap<QueryKind, &Verdict> = BTreeMap::new();
    for v in verdicts {
        if by_kind.insert(v.kind, v).is_some() {
            return Err(ReportError::DuplicateFeatureVerdict(v.kind));
        }
    }
    let judge = |f: Feature| -> (bool, Provenance) {
        match by_kind.get(&f.query_kind()) {
            None => (false, Provenance::NotApplicable),
            Some(v) => match v.status {
                VerdictStatus::Holds if v.vacuous => (false, Provenance::Vacuous),
                VerdictStatus::Holds => (true, Provenance::Verified),
                VerdictStatus::Violated => (false, Provenance::Verified),
                VerdictStatus::Unknown => (false, Provenance::Unknown),
                VerdictStatus::NotApplicable => (false, Provenance::NotApplicable),
            },
        }
    };
    let (encryption, pe) = judge(Feature::Encryption);
    let (nonce, pn) = judge(Feature::Nonce);
    let (authentication, pa) = judge(Feature::Authentication);
    Ok(FeatureProfile {
        encryption,
        nonce,
        authentication,
        provenance: FeatureProvenance { encryption: pe, nonce: pn, authentication: pa },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attack {
    Eavesdropping,
    TrafficAnalysis,
    Replay,
    MessageInjection,
    MessageModification,
    Spoofing,
    Mitm,
}

impl Attack {
    pub const ALL: [Attack; 7] = [
        Attack::Eavesdropping,
        Attack::TrafficAnalysis,
        Attack::Replay,
        Attack::MessageInjection,
        Attack::MessageModification,
        Attack::Spoofing,
        Attack::Mitm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attack::Eavesdropping => "eavesdropping",
            Attack::TrafficAnalysis => "traffic_analysis",
            Attack::Replay => "replay",
            Attack::MessageInjection => "message_injection",
            Attack::MessageModification => "message_modification",
            Attack::Spoofing => "spoofing",
            Attack::Mitm => "mitm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

impl fmt::Display for Attack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type AttackSet = BTreeSet<Attack>;

/// For each attack, the features whose absence enables it. An attack is
/// possible when any one of them is missing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, Vec<String>>", into = "BTreeMap<String, Vec<String>>")]
pub struct AttackMatrix(BTreeMap<Attack, BTreeSet<Feature>>);

impl Default for AttackMatrix {
    fn default() -> Self {
        use Attack::*;
        use Feature::*;
        let rows: [(Attack, &[Feature]); 7] = [
            (Eavesdropping, &[Encryption]),
            (TrafficAnalysis, &[Encryption]),
            (Replay, &[Nonce]),
            (MessageInjection, &[Nonce, Authentication]),
            (MessageModification, &[Nonce, Authentication]),
            (Spoofing, &[Authentication]),
            (Mitm, &[Encryption, Nonce, Authentication]),
        ];
        AttackMatrix(rows.into_iter().map(|(a, fs)| (a, fs.iter().copied().collect())).collect())
    }
}

impl AttackMatrix {
    pub fn new(rows: BTreeMap<Attack, BTreeSet<Feature>>) -> Result<Self, ReportError> {
        for f in Feature::ALL {
            if !rows.values().any(|fs| fs.contains(&f)) {
                return Err(ReportError::FeatureUnused(f));
            }
        }
        Ok(AttackMatrix(rows))
    }

    pub fn rows(&self) -> &BTreeMap<Attack, BTreeSet<Feature>> {
        &self.0
    }

    pub fn classify(&self, profile: &FeatureProfile) -> AttackSet {
        self.0.iter().filter(|(_, fs)| fs.iter().any(|f| !profile.has(*f))).map(|(a, _)| *a).collect()
    }
}

impl TryFrom<BTreeMap<String, Vec<String>>> for AttackMatrix {
    type Error = ReportError;

    fn try_from(raw: BTreeMap<String, Vec<String>>) -> Result<Self, Self::Error> {
        let mut rows = BTreeMap::new();
        for (a, fs) in raw {
            let attack = Attack::parse(&a).ok_or(ReportError::UnknownAttack(a))?;
            let feats = fs
                .iter()
                .map(|f| Feature::parse(f).ok_or_else(|| ReportError::UnknownFeature(f.clone())))
                .collect::<Result<BTreeSet<_>, _>>()?;
            rows.insert(attack, feats);
        }
        AttackMatrix::new(rows)
    }
}

impl From<AttackMatrix> for BTreeMap<String, Vec<String>> {
    fn from(m: AttackMatrix) -> Self {
        m.0.into_iter()
            .map(|(a, fs)| (a.as_str().to_string(), fs.into_iter().map(|f| f.as_str().to_string()).collect()))
            .collect()
    }
}

/// Attacks enabled by the profile's missing features, default matrix.
pub fn classify_attacks(profile: &FeatureProfile) -> AttackSet {
    AttackMatrix::default().classify(profile)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub category: String,
    pub downloads: DownloadsBucket,
    pub rating: f64,
    pub developer: String,
    pub version_code: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnReport {
    pub app_id: String,
    pub metadata: ReportMetadata,
    pub profile: FeatureProfile,
    pub attacks: AttackSet,
    pub secure: bool,
    pub pipeline_failure: bool,
    pub verdicts: Vec<Verdict>,
    /// Rendered attack traces for violated properties.
    pub traces: Vec<String>,
    pub warnings: Vec<String>,
    pub attempts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<TranslationOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

impl VulnReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReportOptions {
    pub matrix: AttackMatrix,
    pub timestamps: bool,
}

/// Builds the report for one app. `session` is `None` when the pipeline
/// stopped before translation; `failure` carries the reason.
pub fn build_report(
    app: &AppPackage,
    session: Option<&TranslationSession>,
    verdicts: &[Verdict],
    failure: Option<&str>,
    opts: &ReportOptions,
) -> VulnReport {
    let mut warnings = Vec::new();
    let translated = session.is_some_and(TranslationSession::succeeded);
    let mut pipeline_failure = failure.is_some() || !translated;
    if let Some(why) = failure {
        warnings.push(format!("PIPELINE FAILURE: {why}"));
    } else if let Some(s) = session.filter(|s| !s.succeeded()) {
        let why = match &s.outcome {
            TranslationOutcome::GenerationFailed { error } => error.clone(),
            _ => format!("no valid model after {} attempt(s)", s.attempts.len()),
        };
        warnings.push(format!("PIPELINE FAILURE: translation failed: {why}"));
    } else if session.is_none() {
        warnings.push("PIPELINE FAILURE: no translation".to_string());
    }
    let (profile, verdicts) = if pipeline_failure {
        (FeatureProfile::unknown(), Vec::new())
    } else {
        match derive_profile(verdicts) {
            Ok(p) => (p, verdicts.to_vec()),
            Err(e) => {
                warnings.push(format!("PIPELINE FAILURE: {e}"));
                pipeline_failure = true;
                (FeatureProfile::unknown(), Vec::new())
            }
        }
    };
    for v in &verdicts {
        match v.status {
            VerdictStatus::Unknown => warnings.push(format!("{} verdict unknown: {}", v.kind, v.warnings.join("; "))),
            VerdictStatus::Holds if v.vacuous => warnings.push(format!("{} holds only vacuously", v.kind)),
            _ => {}
        }
    }
    if app.obfuscation_suspect() {
        warnings.push("obfuscation suspected: most class names are a single character".to_string());
    }
    let traces =
        verdicts.iter().filter_map(|v| v.trace.as_ref().map(|t| format!("{}:\n{}", v.kind, t.render()))).collect();
    let attacks = opts.matrix.classify(&profile);
    VulnReport {
        app_id: app.app_id.clone(),
        metadata: ReportMetadata {
            category: app.metadata.category.clone(),
            downloads: app.metadata.downloads_bucket,
            rating: app.metadata.rating,
            developer: app.metadata.developer.clone(),
            version_code: app.metadata.version_code,
        },
        secure: profile.is_secure(),
        profile,
        attacks,
        pipeline_failure,
        verdicts,
        traces,
        warnings,
        attempts: session.map_or(0, |s| s.attempts.len()),
        translation: session.map(|s| s.outcome.clone()),
        generated_at: opts.timestamps.then(|| chrono::Utc::now().to_rfc3339()),
    }
}
