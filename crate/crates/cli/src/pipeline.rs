use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use bleproof_core::config::{PipelineConfig, TranslatorMode};
use bleproof_core::ingest::{app_dirs, is_ble_app, load_app, AppPackage, IngestError};
use bleproof_core::pvlang::QueryKind;
use bleproof_core::report::{
    aggregate_corpus, build_report, CorpusStats, Dimension, GroupStats, ReportOptions, VulnReport,
};
use bleproof_core::slicer::slice_app;
use bleproof_core::translator::{translate_with_repair, Generator, KnowledgeBase, OfflineGenerator, RemoteGenerator};
use bleproof_core::verifier::verify_features;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("knowledge base: {0}")]
    Kb(String),
    #[error("translator: {0}")]
    Generator(String),
    #[error("corpus at {0} has no BLE apps")]
    EmptyCorpus(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

/// Everything that is set up once and shared by every app.
pub struct Pipeline {
    pub config: PipelineConfig,
    pub kb: KnowledgeBase,
    pub generator: Box<dyn Generator>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        let generator: Box<dyn Generator> = match config.translator.mode {
            TranslatorMode::Offline => Box::new(OfflineGenerator::new()),
            TranslatorMode::Remote => {
                let mut remote = config
                    .translator
                    .remote_config()
                    .ok_or_else(|| PipelineError::Generator("remote mode without an endpoint".into()))?;
                remote.seed = Some(config.seed);
                Box::new(RemoteGenerator::new(remote).map_err(|e| PipelineError::Generator(e.to_string()))?)
            }
        };
        Self::with_generator(config, generator)
    }

    /// Same as [`Pipeline::new`] but with a caller-supplied generator.
    pub fn with_generator(config: PipelineConfig, generator: Box<dyn Generator>) -> Result<Self, PipelineError> {
        let kb = match &config.translator.kb_path {
            Some(p) => KnowledgeBase::load_dir(p).map_err(|e| PipelineError::Kb(e.to_string()))?,
            None => KnowledgeBase::shipped(),
        };
        Ok(Pipeline { config, kb, generator })
    }

    fn report_options(&self) -> ReportOptions {
        ReportOptions {
            matrix: self.config.report.matrix.clone().unwrap_or_default(),
            timestamps: self.config.report.timestamps,
        }
    }

    /// Slice, translate, verify and report one app. Never fails: problems
    /// end up in the report.
    pub fn analyze(&self, app: &AppPackage) -> VulnReport {
        let anchors: BTreeSet<String> = self.config.slicer.anchors.iter().cloned().collect();
        let opts = self.report_options();
        let (slice, slice_warnings) = match slice_app(app, &anchors, self.config.slicer.depth_cap) {
            Ok(s) => s,
            Err(e) => return build_report(app, None, &[], Some(&format!("slicing failed: {e}")), &opts),
        };
        let tcfg = self.config.translator.translator_config();
        let session = match translate_with_repair(&slice, self.generator.as_ref(), &self.kb, &tcfg) {
            Ok(s) => s,
            Err(e) => return build_report(app, None, &[], Some(&format!("translation failed: {e}")), &opts),
        };
        let verdicts = match &session.final_model {
            Some(model) => {
                let kinds: BTreeSet<QueryKind> =
                    [QueryKind::Secrecy, QueryKind::Freshness, QueryKind::Correspondence].into();
                verify_features(model, &kinds, &self.config.verifier)
            }
            None => Vec::new(),
        };
        let mut report = build_report(app, Some(&session), &verdicts, None, &opts);
        report.warnings.extend(slice_warnings.into_iter().map(|w| format!("slicer: {w}")));
        report
    }
}

pub fn write_report(dir: &Path, stem: &str, report: &VulnReport) -> Result<PathBuf, PipelineError> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let path = dir.join(format!("{stem}.json"));
    std::fs::write(&path, report.to_json()).map_err(io(&path))?;
    Ok(path)
}

pub fn stem_of(app_dir: &Path) -> String {
    app_dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "app".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub dir: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub overall: CorpusStats,
    pub by: BTreeMap<String, Vec<GroupStats>>,
    pub skipped: Vec<Skipped>,
}

impl CorpusSummary {
    pub fn new(reports: &[VulnReport], skipped: Vec<Skipped>) -> Option<Self> {
        let overall = aggregate_corpus(reports, Dimension::None).ok()?;
        let dims = [
            ("category", Dimension::Category),
            ("downloads", Dimension::Downloads),
            ("rating", Dimension::Rating),
            ("developer", Dimension::Developer),
            ("version", Dimension::Version),
        ];
        let by = dims
            .into_iter()
            .map(|(name, d)| (name.to_string(), aggregate_corpus(reports, d).expect("non-empty").groups))
            .collect();
        Some(CorpusSummary { overall, by, skipped })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

pub struct BatchOutcome {
    pub reports: Vec<(String, VulnReport)>,
    pub summary: CorpusSummary,
}

/// Analyzes every BLE app of a corpus on `config.parallelism` workers and
/// writes per-app reports plus `corpus.json` into `out`.
pub fn run_batch(pipeline: &Pipeline, corpus: &Path, out: &Path) -> Result<BatchOutcome, PipelineError> {
    let dirs = app_dirs(corpus)?;
    let mut apps = Vec::new();
    let mut skipped = Vec::new();
    for dir in dirs {
        let stem = stem_of(&dir);
        match load_app(&dir) {
            Ok(app) if is_ble_app(&app) => apps.push((stem, app)),
            Ok(_) => skipped.push(Skipped { dir: stem, reason: "no BLE usage".into() }),
            Err(e) => {
                tracing::warn!(dir = %dir.display(), error = %e, "skipping app");
                skipped.push(Skipped { dir: stem, reason: e.to_string() });
            }
        }
    }
    if apps.is_empty() {
        return Err(PipelineError::EmptyCorpus(corpus.to_path_buf()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(pipeline.config.parallelism.max(1))
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    let reports: Vec<(String, VulnReport)> = pool.install(|| {
        apps.par_iter()
            .map(|(stem, app)| {
                tracing::info!(app = %app.app_id, "analyzing");
                (stem.clone(), pipeline.analyze(app))
            })
            .collect()
    });
    for (stem, r) in &reports {
        write_report(out, stem, r)?;
    }
    let plain: Vec<VulnReport> = reports.iter().map(|(_, r)| r.clone()).collect();
    let summary = CorpusSummary::new(&plain, skipped).expect("at least one report");
    let path = out.join("corpus.json");
    std::fs::write(&path, summary.to_json()).map_err(io(&path))?;
    Ok(BatchOutcome { reports, summary })
}

/// Loads every `*.json` report in a directory except `corpus.json`.
pub fn load_reports(dir: &Path) -> Result<Vec<VulnReport>, PipelineError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != "corpus.json"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(&f).map_err(io(&f))?;
        match serde_json::from_str(&text) {
            Ok(r) => out.push(r),
            Err(e) => tracing::warn!(file = %f.display(), error = %e, "not a report, skipped"),
        }
    }
    Ok(out)
}
