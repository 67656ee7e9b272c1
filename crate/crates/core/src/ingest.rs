//! Loading decompiled app source trees and their metadata sidecars.
//!
//! Corpus layout: `<corpus>/<app_dir>/src/**/*.java`, plus optional
//! `<app_dir>/metadata` (`key=value` lines) and `<app_dir>/manifest`
//! (one permission per line). When an app directory has no `src/`
//! subdirectory the whole directory is scanned for sources.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const UNKNOWN: &str = "unknown";

/// Source tokens that mark an app as BLE-capable.
pub const DEFAULT_BLE_TOKENS: &[&str] = &["connectGatt", "onLeScan", "startLeScan", "BluetoothLeScanner"];

const SOURCE_EXTENSIONS: &[&str] = &["java", "kt", "smali"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("not a directory: {0}")]
    NotADirectory(PathBuf),
    #[error("no source files found under {0}")]
    NoSourcesFound(PathBuf),
    #[error("malformed metadata in {path} line {line}: {reason}")]
    MalformedMetadata { path: PathBuf, line: usize, reason: String },
    #[error("source file {0} is not valid UTF-8")]
    InvalidUtf8(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io { path: path.to_path_buf(), source }
}

/// One decompiled source file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub path: String,
    pub text: String,
    pub class_name: String,
}

impl SourceUnit {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        let path = path.into();
        let class_name = class_name_for(&path);
        SourceUnit { path, text: text.into(), class_name }
    }
}

/// `com/acme/Lock.java` -> `Lock`.
pub fn class_name_for(path: &str) -> String {
    let file = path.rsplit(['/', '\\']).next().unwrap_or(path);
    match file.find('.') {
        Some(idx) => file[..idx].to_string(),
        None => file.to_string(),
    }
}

/// Download ranges used for popularity grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DownloadsBucket {
    #[serde(rename = "1-50+")]
    UpTo50,
    #[serde(rename = "100-500+")]
    Hundreds,
    #[serde(rename = "1000+")]
    Thousand,
    #[serde(rename = "5000+")]
    FiveThousand,
    #[serde(rename = "10000-50000+")]
    TensOfThousands,
    #[serde(rename = "100000-500000+")]
    HundredsOfThousands,
    #[serde(rename = "1000000+")]
    Million,
    #[serde(rename = "unknown")]
    Unknown,
}

impl DownloadsBucket {
    pub const RANGES: [DownloadsBucket; 7] = [
        DownloadsBucket::UpTo50,
        DownloadsBucket::Hundreds,
        DownloadsBucket::Thousand,
        DownloadsBucket::FiveThousand,
        DownloadsBucket::TensOfThousands,
        DownloadsBucket::HundredsOfThousands,
        DownloadsBucket::Million,
    ];

    pub fn from_count(n: u64) -> Self {
        match n {
            0..=99 => DownloadsBucket::UpTo50,
            100..=999 => DownloadsBucket::Hundreds,
            1_000..=4_999 => DownloadsBucket::Thousand,
            5_000..=9_999 => DownloadsBucket::FiveThousand,
            10_000..=99_999 => DownloadsBucket::TensOfThousands,
            100_000..=999_999 => DownloadsBucket::HundredsOfThousands,
            _ => DownloadsBucket::Million,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DownloadsBucket::UpTo50 => "1-50+",
            DownloadsBucket::Hundreds => "100-500+",
            DownloadsBucket::Thousand => "1000+",
            DownloadsBucket::FiveThousand => "5000+",
            DownloadsBucket::TensOfThousands => "10000-50000+",
            DownloadsBucket::HundredsOfThousands => "100000-500000+",
            DownloadsBucket::Million => "1000000+",
            DownloadsBucket::Unknown => UNKNOWN,
        }
    }

    /// Accepts either a bucket label or a raw count such as `5,000+`.
    pub fn parse(raw: &str) -> Option<Self> {
        let raw = raw.trim();
        if let Some(b) = Self::RANGES.iter().find(|b| b.label() == raw) {
            return Some(*b);
        }
        if raw.eq_ignore_ascii_case(UNKNOWN) {
            return Some(DownloadsBucket::Unknown);
        }
        let digits: String = raw.chars().filter(|c| !matches!(c, ',' | '_' | '+')).collect();
        digits.parse::<u64>().ok().map(Self::from_count)
    }
}

impl fmt::Display for DownloadsBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppMetadata {
    pub category: String,
    pub downloads_bucket: DownloadsBucket,
    pub rating: f64,
    pub developer: String,
    pub version_code: u64,
    pub release_date: Option<String>,
}

impl Default for AppMetadata {
    fn default() -> Self {
        AppMetadata {
            category: UNKNOWN.to_string(),
            downloads_bucket: DownloadsBucket::Unknown,
            rating: 0.0,
            developer: UNKNOWN.to_string(),
            version_code: 0,
            release_date: None,
        }
    }
}

impl AppMetadata {
    pub fn parse(text: &str, path: &Path) -> Result<Self, IngestError> {
        let mut meta = AppMetadata::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad =
                |reason: String| IngestError::MalformedMetadata { path: path.to_path_buf(), line: idx + 1, reason };
            let (key, value) = line.split_once('=').ok_or_else(|| bad(format!("expected key=value, got {line:?}")))?;
            let value = value.trim();
            match key.trim() {
                "category" => meta.category = value.to_string(),
                "developer" => meta.developer = value.to_string(),
                "downloads" => {
                    meta.downloads_bucket = DownloadsBucket::parse(value)
                        .ok_or_else(|| bad(format!("unrecognized downloads value {value:?}")))?
                }
                "rating" => {
                    let r: f64 = value.parse().map_err(|_| bad(format!("rating {value:?} is not a number")))?;
                    if !(0.0..=5.0).contains(&r) {
                        return Err(bad(format!("rating {r} outside [0, 5]")));
                    }
                    meta.rating = r;
                }
                "version" => {
                    meta.version_code =
                        value.parse().map_err(|_| bad(format!("version {value:?} is not a non-negative integer")))?
                }
                "released" => {
                    chrono::NaiveDate::parse_from_str(value, "%Y-%m-%d")
                        .map_err(|_| bad(format!("released {value:?} is not an ISO-8601 date")))?;
                    meta.release_date = Some(value.to_string());
                }
                _ => {}
            }
        }
        Ok(meta)
    }
}

/// One decompiled app. Immutable once loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppPackage {
    pub app_id: String,
    pub source_units: Vec<SourceUnit>,
    pub metadata: AppMetadata,
    pub manifest_permissions: BTreeSet<String>,
}

impl AppPackage {
    /// Fraction of single-character class names above one half marks the
    /// app as a likely obfuscation victim.
    pub fn obfuscation_suspect(&self) -> bool {
        if self.source_units.is_empty() {
            return false;
        }
        let short = self.source_units.iter().filter(|u| u.class_name.chars().count() == 1).count();
        short * 2 > self.source_units.len()
    }
}

/// App directories may carry a `@<tag>` suffix (e.g. `com.acme.lock@12`) so
/// several versions of one app can live in the same corpus.
pub fn app_id_from_dir_name(name: &str) -> &str {
    name.split('@').next().unwrap_or(name)
}

pub fn load_app(root_dir: &Path) -> Result<AppPackage, IngestError> {
    if !root_dir.is_dir() {
        return Err(IngestError::NotADirectory(root_dir.to_path_buf()));
    }
    let dir_name = root_dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let src_root = root_dir.join("src");
    let scan_root = if src_root.is_dir() { src_root } else { root_dir.to_path_buf() };

    let mut files = Vec::new();
    collect_sources(&scan_root, &mut files)?;
    files.sort();
    if files.is_empty() {
        return Err(IngestError::NoSourcesFound(root_dir.to_path_buf()));
    }
    let mut units = Vec::with_capacity(files.len());
    for file in files {
        let bytes = fs::read(&file).map_err(io_err(&file))?;
        let text = String::from_utf8(bytes).map_err(|_| IngestError::InvalidUtf8(file.clone()))?;
        let rel = file
            .strip_prefix(&scan_root)
            .unwrap_or(&file)
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        units.push(SourceUnit::new(rel, text));
    }

    let meta_path = root_dir.join("metadata");
    let metadata = if meta_path.is_file() {
        let text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
        AppMetadata::parse(&text, &meta_path)?
    } else {
        AppMetadata::default()
    };

    let manifest_path = root_dir.join("manifest");
    let manifest_permissions = if manifest_path.is_file() {
        fs::read_to_string(&manifest_path)
            .map_err(io_err(&manifest_path))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect()
    } else {
        BTreeSet::new()
    };

    Ok(AppPackage {
        app_id: app_id_from_dir_name(&dir_name).to_string(),
        source_units: units,
        metadata,
        manifest_permissions,
    })
}

fn collect_sources(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), IngestError> {
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_dir() {
            collect_sources(&path, out)?;
        } else if path.extension().and_then(|e| e.to_str()).is_some_and(|e| SOURCE_EXTENSIONS.contains(&e)) {
            out.push(path);
        }
    }
    Ok(())
}

/// True when `token` occurs in `text` delimited by non-identifier characters.
pub fn contains_token(text: &str, token: &str) -> bool {
    if token.is_empty() {
        return false;
    }
    let bytes = text.as_bytes();
    let is_ident = |b: u8| b.is_ascii_alphanumeric() || b == b'_' || b == b'$';
    let mut from = 0;
    while let Some(pos) = text[from..].find(token) {
        let start = from + pos;
        let end = start + token.len();
        let before_ok = start == 0 || !is_ident(bytes[start - 1]);
        let after_ok = end >= bytes.len() || !is_ident(bytes[end]);
        if before_ok && after_ok {
            return true;
        }
        from = start + 1;
        while !text.is_char_boundary(from) {
            from += 1;
        }
    }
    false
}

pub fn is_bluetooth_permission(perm: &str) -> bool {
    perm.starts_with("android.permission.BLUETOOTH")
}

pub fn is_ble_app(app: &AppPackage) -> bool {
    is_ble_app_with(app, DEFAULT_BLE_TOKENS.iter().copied())
}

/// Token OR permission filter.
pub fn is_ble_app_with<'a>(app: &AppPackage, tokens: impl IntoIterator<Item = &'a str>) -> bool {
    if app.manifest_permissions.iter().any(|p| is_bluetooth_permission(p)) {
        return true;
    }
    let tokens: Vec<&str> = tokens.into_iter().collect();
    app.source_units.iter().any(|u| tokens.iter().any(|t| contains_token(&u.text, t)))
}

/// Every app directory of the corpus, loaded. Directories without sources are
/// skipped; other load errors propagate.
pub fn load_all(corpus_dir: &Path) -> Result<Vec<AppPackage>, IngestError> {
    if !corpus_dir.is_dir() {
        return Err(IngestError::NotADirectory(corpus_dir.to_path_buf()));
    }
    let mut apps = Vec::new();
    for dir in app_dirs(corpus_dir)? {
        match load_app(&dir) {
            Ok(app) => apps.push(app),
            Err(IngestError::NoSourcesFound(_)) => {
                tracing::warn!(dir = %dir.display(), "skipping app directory without sources");
            }
            Err(e) => return Err(e),
        }
    }
    apps.sort_by(|a, b| a.app_id.cmp(&b.app_id).then(a.metadata.version_code.cmp(&b.metadata.version_code)));
    Ok(apps)
}

/// Sorted app directories of a corpus.
pub fn app_dirs(corpus_dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    if !corpus_dir.is_dir() {
        return Err(IngestError::NotADirectory(corpus_dir.to_path_buf()));
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(corpus_dir)
        .map_err(io_err(corpus_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

pub fn discover_corpus(corpus_dir: &Path) -> Result<Vec<AppPackage>, IngestError> {
    discover_corpus_with(corpus_dir, DEFAULT_BLE_TOKENS)
}

pub fn discover_corpus_with(corpus_dir: &Path, tokens: &[&str]) -> Result<Vec<AppPackage>, IngestError> {
    Ok(load_all(corpus_dir)?.into_iter().filter(|a| is_ble_app_with(a, tokens.iter().copied())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, rel: &str, text: &str) {
        let p = dir.join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, text).unwrap();
    }

    #[test]
    fn loads_sources_and_sidecar() {
        let tmp = tempfile::tempdir().unwrap();
        let app = tmp.path().join("com.acme.lock");
        write(&app, "src/com/acme/A.java", "class A {}");
        write(&app, "src/com/acme/B.java", "class B {}");
        write(&app, "src/com/acme/util/C.java", "class C {}");
        write(
            &app,
            "metadata",
            "category=Health\ndownloads=12,000+\nrating=4.2\ndeveloper=Acme\nversion=7\nreleased=2023-06-07\n",
        );
        let pkg = load_app(&app).unwrap();
        assert_eq!(pkg.app_id, "com.acme.lock");
        assert_eq!(pkg.source_units.len(), 3);
        assert_eq!(pkg.source_units[2].path, "com/acme/util/C.java");
        assert_eq!(pkg.source_units[2].class_name, "C");
        assert_eq!(pkg.metadata.category, "Health");
        assert_eq!(pkg.metadata.downloads_bucket, DownloadsBucket::TensOfThousands);
        assert_eq!(pkg.metadata.version_code, 7);
        assert_eq!(pkg.metadata.release_date.as_deref(), Some("2023-06-07"));
    }

    #[test]
    fn empty_dir_has_no_sources() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(load_app(tmp.path()), Err(IngestError::NoSourcesFound(_))));
    }

    #[test]
    fn missing_sidecar_defaults_to_unknown() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "src/A.java", "class A {}");
        let pkg = load_app(tmp.path()).unwrap();
        assert_eq!(pkg.metadata.category, UNKNOWN);
        assert_eq!(pkg.metadata.downloads_bucket, DownloadsBucket::Unknown);
        assert_eq!(pkg.metadata.version_code, 0);
    }

    #[test]
    fn not_a_directory() {
        let tmp = tempfile::tempdir().unwrap();
        let f = tmp.path().join("file");
        fs::write(&f, "x").unwrap();
        assert!(matches!(load_app(&f), Err(IngestError::NotADirectory(_))));
        assert!(matches!(discover_corpus(&f), Err(IngestError::NotADirectory(_))));
    }

    #[test]
    fn malformed_sidecar() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "src/A.java", "class A {}");
        for bad in ["rating=7.5", "rating=high", "no equals sign", "version=-3", "released=June"] {
            write(tmp.path(), "metadata", bad);
            assert!(matches!(load_app(tmp.path()), Err(IngestError::MalformedMetadata { .. })), "{bad}");
        }
    }

    #[test]
    fn download_buckets() {
        assert_eq!(DownloadsBucket::parse("50"), Some(DownloadsBucket::UpTo50));
        assert_eq!(DownloadsBucket::parse("500+"), Some(DownloadsBucket::Hundreds));
        assert_eq!(DownloadsBucket::parse("1000+"), Some(DownloadsBucket::Thousand));
        assert_eq!(DownloadsBucket::parse("5,000+"), Some(DownloadsBucket::FiveThousand));
        assert_eq!(DownloadsBucket::parse("100000-500000+"), Some(DownloadsBucket::HundredsOfThousands));
        assert_eq!(DownloadsBucket::parse("10000000"), Some(DownloadsBucket::Million));
        assert_eq!(DownloadsBucket::parse("lots"), None);
    }

    #[test]
    fn ble_detection() {
        let mk = |text: &str, perms: &[&str]| AppPackage {
            app_id: "x".into(),
            source_units: vec![SourceUnit::new("A.java", text)],
            metadata: AppMetadata::default(),
            manifest_permissions: perms.iter().map(|s| s.to_string()).collect(),
        };
        assert!(is_ble_app(&mk("gatt = device.connectGatt(ctx, false, cb);", &[])));
        assert!(is_ble_app(&mk("class A {}", &["android.permission.BLUETOOTH"])));
        assert!(!is_ble_app(&mk("void reconnectGattLater() {}", &["android.permission.INTERNET"])));
    }

    #[test]
    fn token_boundaries() {
        assert!(contains_token("a.connectGatt(x)", "connectGatt"));
        assert!(contains_token("connectGatt", "connectGatt"));
        assert!(!contains_token("myconnectGatt()", "connectGatt"));
        assert!(!contains_token("connectGattX", "connectGatt"));
        assert!(contains_token("\"BluetoothGatt\"", "BluetoothGatt"));
    }

    #[test]
    fn obfuscation_heuristic() {
        let units = ["a/A.java", "a/b.java", "a/Real.java"].iter().map(|p| SourceUnit::new(*p, "")).collect();
        let app = AppPackage {
            app_id: "x".into(),
            source_units: units,
            metadata: AppMetadata::default(),
            manifest_permissions: BTreeSet::new(),
        };
        assert!(app.obfuscation_suspect());
    }
}
