use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use super::{Attack, ReportError, VulnReport};
use crate::ingest::DownloadsBucket;

/// A percentage in hundredths, rounded half up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(from = "f64")]
pub struct Percent(pub u64);

impl Percent {
    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl From<f64> for Percent {
    fn from(x: f64) -> Self {
        Percent((x * 100.0).round().max(0.0) as u64)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&format!("{}.{:02}", self.0 / 100, self.0 % 100))
    }
}

/// `100 * count / total` in hundredths, rounded half up, in integers.
pub fn percent_of(count: usize, total: usize) -> Percent {
    if total == 0 {
        return Percent(0);
    }
    let (c, t) = (count as u64, total as u64);
    Percent((20_000 * c + t) / (2 * t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    #[default]
    None,
    Category,
    Downloads,
    Rating,
    Developer,
    Version,
}

impl std::str::FromStr for Dimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "none" => Dimension::None,
            "category" => Dimension::Category,
            "downloads" => Dimension::Downloads,
            "rating" | "rating_interval" => Dimension::Rating,
            "developer" => Dimension::Developer,
            "version" => Dimension::Version,
            other => return Err(format!("unknown dimension `{other}`")),
        })
    }
}

pub const RATING_INTERVALS: [&str; 5] = ["[0,1)", "[1,2)", "[2,3)", "[3,4)", "[4,5]"];

fn rating_interval(r: f64) -> (usize, String) {
    if !(0.0..=5.0).contains(&r) {
        return (RATING_INTERVALS.len(), "unknown".to_string());
    }
    let i = (r.floor() as usize).min(4);
    (i, RATING_INTERVALS[i].to_string())
}

/// Sort key and label of a report along a dimension.
fn group_key(r: &VulnReport, dim: Dimension) -> (u64, String) {
    match dim {
        Dimension::None => (0, "all".to_string()),
        Dimension::Category => (0, r.metadata.category.clone()),
        Dimension::Developer => (0, r.metadata.developer.clone()),
        Dimension::Version => (r.metadata.version_code, r.metadata.version_code.to_string()),
        Dimension::Downloads => {
            let b = r.metadata.downloads;
            let i = DownloadsBucket::RANGES.iter().position(|x| *x == b).unwrap_or(DownloadsBucket::RANGES.len());
            (i as u64, b.label().to_string())
        }
        Dimension::Rating => {
            let (i, label) = rating_interval(r.metadata.rating);
            (i as u64, label)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComboRow {
    pub encryption: bool,
    pub nonce: bool,
    pub authentication: bool,
    pub count: usize,
    pub percent: Percent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackRow {
    pub attack: Attack,
    pub count: usize,
    pub percent: Percent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupStats {
    pub key: String,
    pub total: usize,
    pub combinations: Vec<ComboRow>,
    pub attacks: Vec<AttackRow>,
    pub secure: usize,
    pub secure_percent: Percent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub pipeline_failures: usize,
    pub combinations: Vec<ComboRow>,
    pub attacks: Vec<AttackRow>,
    pub secure: usize,
    pub secure_percent: Percent,
    pub group_by: Dimension,
    pub groups: Vec<GroupStats>,
}

impl CorpusStats {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("stats serialize");
        s.push('\n');
        s
    }
}

/// Table order: all features first, counting down in binary with
/// encryption as the high bit.
pub fn combination_order() -> impl Iterator<Item = (bool, bool, bool)> {
    (0..8u8).rev().map(|b| (b & 4 != 0, b & 2 != 0, b & 1 != 0))
}

fn summarize(reports: &[&VulnReport]) -> GroupStats {
    let total = reports.len();
    let mut combos: BTreeMap<(bool, bool, bool), usize> = BTreeMap::new();
    let mut attacks: BTreeMap<Attack, usize> = BTreeMap::new();
    for r in reports {
        *combos.entry(r.profile.combination()).or_default() += 1;
        for a in &r.attacks {
            *attacks.entry(*a).or_default() += 1;
        }
    }
    let combinations = combination_order()
        .map(|c| {
            let count = combos.get(&c).copied().unwrap_or(0);
            ComboRow { encryption: c.0, nonce: c.1, authentication: c.2, count, percent: percent_of(count, total) }
        })
        .collect();
    let attacks = Attack::ALL
        .iter()
        .map(|a| {
            let count = attacks.get(a).copied().unwrap_or(0);
            AttackRow { attack: *a, count, percent: percent_of(count, total) }
        })
        .collect();
    let secure = reports.iter().filter(|r| r.secure).count();
    GroupStats { key: String::new(), total, combinations, attacks, secure, secure_percent: percent_of(secure, total) }
}

pub fn aggregate_corpus(reports: &[VulnReport], group_by: Dimension) -> Result<CorpusStats, ReportError> {
    if reports.is_empty() {
        return Err(ReportError::EmptyCorpus);
    }
    let all: Vec<&VulnReport> = reports.iter().collect();
    let overall = summarize(&all);
    let mut buckets: BTreeMap<(u64, String), Vec<&VulnReport>> = BTreeMap::new();
    if group_by != Dimension::None {
        for r in reports {
            buckets.entry(group_key(r, group_by)).or_default().push(r);
        }
    }
    let groups = buckets.into_iter().map(|((_, key), rs)| GroupStats { key, ..summarize(&rs) }).collect();
    Ok(CorpusStats {
        total: overall.total,
        pipeline_failures: reports.iter().filter(|r| r.pipeline_failure).count(),
        combinations: overall.combinations,
        attacks: overall.attacks,
        secure: overall.secure,
        secure_percent: overall.secure_percent,
        group_by,
        groups,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvolutionRow {
    pub app_id: String,
    /// One cell per version column: secure, insecure, or missing.
    pub cells: Vec<Option<bool>>,
    pub improved: bool,
    pub regressed: bool,
}

/// Version history per app. Columns are the union of version codes seen in
/// the corpus; a cell is `None` when that app has no report for it.
pub fn evolution(reports: &[VulnReport]) -> (Vec<u64>, Vec<EvolutionRow>) {
    let mut columns: Vec<u64> = reports.iter().map(|r| r.metadata.version_code).collect();
    columns.sort_unstable();
    columns.dedup();
    let mut by_app: BTreeMap<&str, BTreeMap<u64, bool>> = BTreeMap::new();
    for r in reports {
        let cell = by_app.entry(&r.app_id).or_default().entry(r.metadata.version_code).or_insert(r.secure);
        // duplicate reports for one version: insecure wins
        *cell &= r.secure;
    }
    let rows = by_app
        .into_iter()
        .map(|(app, versions)| {
            let seen: Vec<bool> = versions.values().copied().collect();
            let first = seen.first().copied().unwrap_or(false);
            let last = seen.last().copied().unwrap_or(false);
            EvolutionRow {
                app_id: app.to_string(),
                cells: columns.iter().map(|v| versions.get(v).copied()).collect(),
                improved: !first && last,
                regressed: first && !last,
            }
        })
        .collect();
    (columns, rows)
}
