//! Pipeline settings. Layers apply in order: defaults, TOML file,
//! environment, then command-line flags (applied by the caller).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::AttackMatrix;
use crate::slicer::{DEFAULT_ANCHORS, DEFAULT_DEPTH_CAP};
use crate::translator::{PromptOptions, RemoteConfig, TranslatorConfig, DEFAULT_TOP_K, KEY_ENV, MODEL_ENV, URL_ENV};
use crate::verifier::VerifierConfig;

pub const ENV_PREFIX: &str = "BLEPROOF_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Toml { path: String, source: toml::de::Error },
    #[error("{key}: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslatorMode {
    #[default]
    Offline,
    Remote,
}

impl std::str::FromStr for TranslatorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "offline" => Ok(TranslatorMode::Offline),
            "remote" => Ok(TranslatorMode::Remote),
            other => Err(format!("unknown mode `{other}` (offline|remote)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlicerSettings {
    pub anchors: Vec<String>,
    pub depth_cap: usize,
}

impl Default for SlicerSettings {
    fn default() -> Self {
        SlicerSettings {
            anchors: DEFAULT_ANCHORS.iter().map(|s| s.to_string()).collect(),
            depth_cap: DEFAULT_DEPTH_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranslatorSettings {
    pub mode: TranslatorMode,
    pub endpoint: Option<String>,
    /// Normally taken from the environment, never from a shared file.
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f32,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
    pub budget: usize,
    pub max_retries: usize,
    pub top_k: usize,
    pub few_shot: usize,
    pub kb_path: Option<PathBuf>,
}

impl Default for TranslatorSettings {
    fn default() -> Self {
        let remote = RemoteConfig::default();
        let prompt = PromptOptions::default();
        TranslatorSettings {
            mode: TranslatorMode::Offline,
            endpoint: None,
            api_key: None,
            model: remote.model,
            temperature: remote.temperature,
            timeout_secs: remote.timeout_secs,
            max_in_flight: remote.max_in_flight,
            budget: prompt.char_budget,
            max_retries: TranslatorConfig::default().max_retries,
            top_k: DEFAULT_TOP_K,
            few_shot: prompt.few_shot,
            kb_path: None,
        }
    }
}

impl TranslatorSettings {
    pub fn translator_config(&self) -> TranslatorConfig {
        TranslatorConfig {
            max_retries: self.max_retries,
            prompt: PromptOptions { char_budget: self.budget, top_k: self.top_k, few_shot: self.few_shot },
        }
    }

    pub fn remote_config(&self) -> Option<RemoteConfig> {
        Some(RemoteConfig {
            url: self.endpoint.clone()?,
            api_key: self.api_key.clone(),
            model: self.model.clone(),
            temperature: self.temperature,
            timeout_secs: self.timeout_secs,
            max_in_flight: self.max_in_flight,
            seed: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSettings {
    pub dir: PathBuf,
    pub timestamps: bool,
    pub matrix: Option<AttackMatrix>,
}

impl Default for ReportSettings {
    fn default() -> Self {
        ReportSettings { dir: PathBuf::from("report"), timestamps: false, matrix: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub slicer: SlicerSettings,
    pub translator: TranslatorSettings,
    pub verifier: VerifierConfig,
    pub report: ReportSettings,
    pub parallelism: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            slicer: SlicerSettings::default(),
            translator: TranslatorSettings::default(),
            verifier: VerifierConfig::default(),
            report: ReportSettings::default(),
            parallelism: 1,
            seed: 0,
        }
    }
}

fn parse_env<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e: T::Err| invalid(key, e.to_string()))
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Toml { path: origin.to_string(), source })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    /// Defaults, then the file if given, then the process environment.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match file {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    /// Applies environment overrides read through `get`.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let var = |name: &str| get(&format!("{ENV_PREFIX}{name}")).filter(|v| !v.is_empty());
        if let Some(v) = get(URL_ENV).filter(|v| !v.is_empty()) {
            self.translator.endpoint = Some(v);
        }
        if let Some(v) = get(KEY_ENV).filter(|v| !v.is_empty()) {
            self.translator.api_key = Some(v);
        }
        if let Some(v) = get(MODEL_ENV).filter(|v| !v.is_empty()) {
            self.translator.model = v;
        }
        if let Some(v) = var("MODE") {
            self.translator.mode = parse_env("BLEPROOF_MODE", &v)?;
        }
        if let Some(v) = var("MAX_RETRIES") {
            self.translator.max_retries = parse_env("BLEPROOF_MAX_RETRIES", &v)?;
        }
        if let Some(v) = var("BUDGET") {
            self.translator.budget = parse_env("BLEPROOF_BUDGET", &v)?;
        }
        if let Some(v) = var("KB_PATH") {
            self.translator.kb_path = Some(PathBuf::from(v));
        }
        if let Some(v) = var("ENGINE") {
            self.verifier.engine = parse_env("BLEPROOF_ENGINE", &v)?;
        }
        if let Some(v) = var("PROVERIF") {
            self.verifier.external_path = Some(PathBuf::from(v));
        }
        if let Some(v) = var("REPORT_DIR") {
            self.report.dir = PathBuf::from(v);
        }
        if let Some(v) = var("PARALLEL") {
            self.parallelism = parse_env("BLEPROOF_PARALLEL", &v)?;
        }
        if let Some(v) = var("SEED") {
            self.seed = parse_env("BLEPROOF_SEED", &v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let range = |key: &str, v: usize, lo: usize, hi: usize| {
            if (lo..=hi).contains(&v) {
                Ok(())
            } else {
                Err(invalid(key, format!("{v} is outside {lo}..={hi}")))
            }
        };
        range("slicer.depth_cap", self.slicer.depth_cap, 1, 64)?;
        if self.slicer.anchors.is_empty() {
            return Err(invalid("slicer.anchors", "at least one anchor token is required"));
        }
        let t = &self.translator;
        range("translator.budget", t.budget, 1_000, 1_000_000)?;
        range("translator.max_retries", t.max_retries, 0, 20)?;
        range("translator.top_k", t.top_k, 1, 64)?;
        range("translator.few_shot", t.few_shot, 0, 8)?;
        range("translator.max_in_flight", t.max_in_flight, 1, 64)?;
        if !(0.0..=2.0).contains(&t.temperature) {
            return Err(invalid("translator.temperature", format!("{} is outside 0..=2", t.temperature)));
        }
        if t.mode == TranslatorMode::Remote && t.endpoint.is_none() {
            return Err(invalid("translator.endpoint", format!("remote mode needs an endpoint (or {URL_ENV})")));
        }
        let v = &self.verifier;
        range("verifier.session_bound", v.session_bound, 1, 4)?;
        range("verifier.term_depth", v.term_depth, 1, 6)?;
        range("verifier.state_cap", v.state_cap, 1, 100_000_000)?;
        range("parallelism", self.parallelism, 1, 256)?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_file_then_env() {
        let mut cfg =
            PipelineConfig::from_toml_str("parallelism = 3\n[translator]\nmax_retries = 2\n", "inline").unwrap();
        assert_eq!(cfg.parallelism, 3);
        cfg.apply_env(|k| match k {
            "BLEPROOF_PARALLEL" => Some("5".into()),
            "VERIFIABLE_LLM_URL" => Some("http://x".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(cfg.parallelism, 5);
        assert_eq!(cfg.translator.max_retries, 2);
        assert_eq!(cfg.translator.endpoint.as_deref(), Some("http://x"));
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        assert!(PipelineConfig::from_toml_str("bogus = 1\n", "inline").is_err());
        let mut cfg = PipelineConfig::default();
        cfg.translator.mode = TranslatorMode::Remote;
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        assert!(cfg.apply_env(|k| (k == "BLEPROOF_PARALLEL").then(|| "many".into())).is_err());
        cfg.parallelism = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn default_round_trips() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert_eq!(PipelineConfig::from_toml_str(&cfg.to_toml(), "inline").unwrap(), cfg);
    }
}
