use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;
pub const DEFAULT_TOP_K: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    SyntaxRules,
    ProtocolTemplates,
    BestPractices,
    ErrorRecovery,
}

impl Category {
    pub const ALL: [Category; 4] =
        [Category::SyntaxRules, Category::ProtocolTemplates, Category::BestPractices, Category::ErrorRecovery];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::SyntaxRules => "syntax_rules",
            Category::ProtocolTemplates => "protocol_templates",
            Category::BestPractices => "best_practices",
            Category::ErrorRecovery => "error_recovery",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbEntry {
    pub id: String,
    pub category: Category,
    pub keys: BTreeSet<String>,
    pub body: String,
    /// Repair action for error-recovery entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fix: Option<String>,
    /// Template name for protocol-template entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("knowledge base is empty")]
    EmptyKnowledgeBase,
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: bad front matter: {reason}")]
    FrontMatter { path: String, reason: String },
    #[error("{path}: unknown category `{category}`")]
    BadCategory { path: String, category: String },
    #[error("{path}: entry id `{id}` does not match file name")]
    IdMismatch { path: String, id: String },
    #[error("{path}: entry is filed under `{dir}` but declares `{declared}`")]
    CategoryMismatch { path: String, dir: String, declared: String },
    #[error("{path}: error-recovery entry needs a faulty and a corrected block")]
    MissingRecoveryPair { path: String },
    #[error("duplicate entry id `{0}`")]
    DuplicateId(String),
}

#[derive(Deserialize)]
struct FrontMatter {
    id: String,
    category: String,
    #[serde(default)]
    keys: Vec<String>,
    fix: Option<String>,
    template: Option<String>,
}

/// Parses one entry: TOML front matter between `+++` lines, then the body.
pub fn parse_entry(text: &str, path: &str) -> Result<KbEntry, KbError> {
    let fm_err = |reason: &str| KbError::FrontMatter { path: path.to_string(), reason: reason.to_string() };
    let rest = text.strip_prefix("+++\n").ok_or_else(|| fm_err("missing opening +++"))?;
    let end = rest.find("\n+++\n").ok_or_else(|| fm_err("missing closing +++"))?;
    let fm: FrontMatter = toml::from_str(&rest[..end]).map_err(|e| fm_err(&e.to_string()))?;
    let category = Category::parse(&fm.category)
        .ok_or_else(|| KbError::BadCategory { path: path.to_string(), category: fm.category.clone() })?;
    let body = rest[end + 5..].trim().to_string();
    if category == Category::ErrorRecovery && !(body.contains("```faulty") && body.contains("```corrected")) {
        return Err(KbError::MissingRecoveryPair { path: path.to_string() });
    }
    Ok(KbEntry { id: fm.id, category, keys: fm.keys.into_iter().collect(), body, fix: fm.fix, template: fm.template })
}

/// Fenced block with the given info string, e.g. `faulty` or `pv`.
pub fn fenced_block<'a>(body: &'a str, info: &str) -> Option<&'a str> {
    let open = format!("```{info}\n");
    let start = body.find(&open)? + open.len();
    let len = body[start..].find("```")?;
    Some(&body[start..start + len])
}

/// Lowercased identifier-ish tokens; `_` is kept so diagnostic codes stay whole.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_')).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    entries: Vec<KbEntry>,
    docs: Vec<BTreeMap<String, usize>>,
    lengths: Vec<usize>,
    df: BTreeMap<String, usize>,
}

mod shipped {
    macro_rules! kb {
        ($($cat:literal / $id:literal),* $(,)?) => {
            pub const FILES: &[(&str, &str)] = &[
                $((concat!($cat, "/", $id, ".md"), include_str!(concat!("../../kb/", $cat, "/", $id, ".md")))),*
            ];
        };
    }

    kb![
        "syntax_rules" / "sr-declarations",
        "syntax_rules" / "sr-processes",
        "syntax_rules" / "sr-let-destructor",
        "syntax_rules" / "sr-queries",
        "syntax_rules" / "sr-freshness-pragma",
        "protocol_templates" / "pt-plaintext",
        "protocol_templates" / "pt-enc-only",
        "protocol_templates" / "pt-nonce-only",
        "protocol_templates" / "pt-auth-only",
        "protocol_templates" / "pt-enc-nonce",
        "protocol_templates" / "pt-enc-auth",
        "protocol_templates" / "pt-nonce-auth",
        "protocol_templates" / "pt-challenge-response",
        "best_practices" / "bp-reasoning-steps",
        "best_practices" / "bp-example-plain-write",
        "best_practices" / "bp-example-challenge",
        "best_practices" / "bp-naming",
        "error_recovery" / "er-syntax",
        "error_recovery" / "er-undeclared",
        "error_recovery" / "er-undeclared-type",
        "error_recovery" / "er-undeclared-event",
        "error_recovery" / "er-query-undeclared-event",
        "error_recovery" / "er-arity",
        "error_recovery" / "er-missing-else",
        "error_recovery" / "er-duplicate-decl",
        "error_recovery" / "er-not-channel",
        "error_recovery" / "er-bad-reduc",
        "error_recovery" / "er-destructor-misuse",
    ];
}

impl KnowledgeBase {
    pub fn new(mut entries: Vec<KbEntry>) -> Result<Self, KbError> {
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = entries.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(KbError::DuplicateId(w[0].id.clone()));
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut docs = Vec::with_capacity(entries.len());
        let mut lengths = Vec::with_capacity(entries.len());
        for e in &entries {
            let tokens = entry_tokens(e);
            lengths.push(tokens.len());
            let mut tf: BTreeMap<String, usize> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for t in tf.keys() {
                *df.entry(t.clone()).or_default() += 1;
            }
            docs.push(tf);
        }
        Ok(KnowledgeBase { entries, docs, lengths, df })
    }

    /// The knowledge base compiled into the binary.
    pub fn shipped() -> Self {
        let entries = shipped::FILES
            .iter()
            .map(|(path, text)| parse_entry(text, path).expect("shipped knowledge base is well formed"))
            .collect();
        Self::new(entries).expect("shipped knowledge base has unique ids")
    }

    /// Loads `<dir>/<category>/<id>.md` files.
    pub fn load_dir(dir: &Path) -> Result<Self, KbError> {
        let io = |p: &Path, e| KbError::Io { path: p.display().to_string(), source: e };
        if !dir.is_dir() {
            return Err(io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
        }
        let mut entries = Vec::new();
        for cat in Category::ALL {
            let sub = dir.join(cat.as_str());
            if !sub.is_dir() {
                continue;
            }
            let mut files: Vec<_> = std::fs::read_dir(&sub)
                .map_err(|e| io(&sub, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "md"))
                .collect();
            files.sort();
            for path in files {
                let text = std::fs::read_to_string(&path).map_err(|e| io(&path, e))?;
                let shown = path.display().to_string();
                let entry = parse_entry(&text, &shown)?;
                if path.file_stem().and_then(|s| s.to_str()) != Some(entry.id.as_str()) {
                    return Err(KbError::IdMismatch { path: shown, id: entry.id });
                }
                if entry.category != cat {
                    return Err(KbError::CategoryMismatch {
                        path: shown,
                        dir: cat.to_string(),
                        declared: entry.category.to_string(),
                    });
                }
                entries.push(entry);
            }
        }
        if entries.is_empty() {
            return Err(KbError::EmptyKnowledgeBase);
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[KbEntry] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&KbEntry> {
        self.entries.binary_search_by(|e| e.id.as_str().cmp(id)).ok().map(|i| &self.entries[i])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// BM25 score of entry `i` for the union of query-key tokens.
    pub fn bm25(&self, i: usize, query_keys: &BTreeSet<String>) -> f64 {
        let n = self.entries.len() as f64;
        let avgdl = self.lengths.iter().sum::<usize>() as f64 / n.max(1.0);
        let dl = self.lengths[i] as f64;
        let terms: BTreeSet<String> = query_keys.iter().flat_map(|k| tokenize(k)).collect();
        terms
            .iter()
            .map(|t| {
                let tf = *self.docs[i].get(t).unwrap_or(&0) as f64;
                if tf == 0.0 {
                    return 0.0;
                }
                let df = *self.df.get(t).unwrap_or(&0) as f64;
                let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * dl / avgdl))
            })
            .sum()
    }

    /// Top `k` entries with their scores. Entries whose keys contain a query
    /// key verbatim come first (more such keys first), then BM25 score, then id.
    pub fn retrieve_scored(&self, query_keys: &BTreeSet<String>, k: usize) -> Result<Vec<(&KbEntry, f64)>, KbError> {
        if self.entries.is_empty() {
            return Err(KbError::EmptyKnowledgeBase);
        }
        let mut ranked: Vec<(usize, usize, f64)> = (0..self.entries.len())
            .map(|i| {
                let exact = self.entries[i].keys.intersection(query_keys).count();
                (i, exact, self.bm25(i, query_keys))
            })
            .collect();
        ranked.sort_by(|a, b| {
            b.1.cmp(&a.1).then(b.2.total_cmp(&a.2)).then_with(|| self.entries[a.0].id.cmp(&self.entries[b.0].id))
        });
        Ok(ranked.into_iter().take(k.max(1)).map(|(i, _, s)| (&self.entries[i], s)).collect())
    }

    pub fn retrieve_context(&self, query_keys: &BTreeSet<String>, k: usize) -> Result<Vec<&KbEntry>, KbError> {
        Ok(self.retrieve_scored(query_keys, k)?.into_iter().map(|(e, _)| e).collect())
    }

    pub fn by_category(&self, cat: Category) -> impl Iterator<Item = &KbEntry> {
        self.entries.iter().filter(move |e| e.category == cat)
    }
}

fn entry_tokens(e: &KbEntry) -> Vec<String> {
    let mut t: Vec<String> = e.keys.iter().flat_map(|k| tokenize(k)).collect();
    t.extend(tokenize(&e.body));
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, cat: Category, keys: &[&str], body: &str) -> KbEntry {
        KbEntry {
            id: id.into(),
            category: cat,
            keys: keys.iter().map(|s| s.to_string()).collect(),
            body: body.into(),
            fix: None,
            template: None,
        }
    }

    #[test]
    fn front_matter_round() {
        let text = "+++\nid = \"x\"\ncategory = \"error_recovery\"\nkeys = [\"E_ARITY\"]\nfix = \"fix_arity\"\n+++\n```faulty\na\n```\n```corrected\nb\n```\n";
        let e = parse_entry(text, "x.md").unwrap();
        assert_eq!(e.category, Category::ErrorRecovery);
        assert_eq!(e.fix.as_deref(), Some("fix_arity"));
        assert_eq!(fenced_block(&e.body, "corrected"), Some("b\n"));
        let bad = "+++\nid = \"x\"\ncategory = \"error_recovery\"\n+++\nno pair";
        assert!(matches!(parse_entry(bad, "x.md"), Err(KbError::MissingRecoveryPair { .. })));
    }

    #[test]
    fn exact_key_beats_lexical() {
        let kb = KnowledgeBase::new(vec![
            entry("a", Category::SyntaxRules, &["let"], "else else else e_missing_else e_missing_else"),
            entry("b", Category::ErrorRecovery, &["E_MISSING_ELSE"], "short"),
        ])
        .unwrap();
        let q: BTreeSet<String> = ["E_MISSING_ELSE".to_string()].into();
        let got = kb.retrieve_context(&q, 2).unwrap();
        assert_eq!(got[0].id, "b");
    }

    #[test]
    fn k_larger_than_kb_returns_all_sorted() {
        let kb = KnowledgeBase::new(vec![
            entry("b", Category::SyntaxRules, &[], "x"),
            entry("a", Category::SyntaxRules, &[], "x"),
        ])
        .unwrap();
        let got: Vec<_> = kb.retrieve_context(&BTreeSet::new(), 10).unwrap().iter().map(|e| e.id.clone()).collect();
        assert_eq!(got, ["a", "b"]);
        assert!(matches!(
            KnowledgeBase::new(vec![]).unwrap().retrieve_context(&BTreeSet::new(), 1),
            Err(KbError::EmptyKnowledgeBase)
        ));
    }
}
