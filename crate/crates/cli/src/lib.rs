//! `bleproof` command line: scan a corpus for BLE apps, analyze one app or a
//! whole corpus, verify a standalone model, and summarize saved reports.

pub mod pipeline;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use bleproof_core::config::{ConfigError, PipelineConfig, TranslatorMode};
use bleproof_core::ingest::{app_dirs, is_ble_app, load_app};
use bleproof_core::pvlang::{parse_valid, QueryKind};
use bleproof_core::report::{
    aggregate_corpus, evolution, render_combinations, render_evolution, render_groups, Dimension, VulnReport,
};
use bleproof_core::verifier::{verify_features, verify_model, EngineMode, Verdict, VerdictStatus};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pipeline::{load_reports, run_batch, stem_of, write_report, Pipeline};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    /// Insecure app or violated property.
    Insecure = 1,
    Usage = 2,
    /// The pipeline could not produce a verdict.
    Failure = 3,
}

#[derive(Debug, Parser)]
#[command(name = "bleproof", version, about = "Formal security analysis of Android BLE apps")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// TOML configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Machine-readable output on stdout
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads for batch analysis
    #[arg(long, global = true)]
    pub parallel: Option<usize>,
    /// Seed for any sampling (offline mode is deterministic regardless)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Record generation time in reports
    #[arg(long, global = true)]
    pub timestamps: bool,
    /// More log output on stderr (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Args, Default)]
pub struct PipelineOpts {
    /// Translator mode: offline or remote
    #[arg(long)]
    pub mode: Option<TranslatorMode>,
    #[arg(long)]
    pub max_retries: Option<usize>,
    /// Prompt budget in characters
    #[arg(long)]
    pub budget: Option<usize>,
    /// Knowledge-base directory replacing the shipped one
    #[arg(long)]
    pub kb: Option<PathBuf>,
    #[arg(long)]
    pub depth_cap: Option<usize>,
    /// Verifier engine: builtin, external or both
    #[arg(long)]
    pub engine: Option<EngineMode>,
    /// Path to the external ProVerif binary
    #[arg(long)]
    pub proverif: Option<PathBuf>,
    #[arg(long)]
    pub session_bound: Option<usize>,
    /// Report output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the BLE apps in a corpus directory
    Scan { corpus: PathBuf },
    /// Run the full pipeline on one app directory
    Analyze {
        app: PathBuf,
        #[command(flatten)]
        opts: PipelineOpts,
    },
    /// Analyze every BLE app of a corpus and aggregate
    Batch {
        corpus: PathBuf,
        #[command(flatten)]
        opts: PipelineOpts,
    },
    /// Verify a standalone model file
    Verify {
        model: PathBuf,
        #[command(flatten)]
        opts: PipelineOpts,
    },
    /// Summarize a directory of saved reports
    Report {
        dir: PathBuf,
        /// none, category, downloads, rating, developer or version
        #[arg(long, default_value = "none")]
        group_by: Dimension,
        /// Per-app version history instead of tables
        #[arg(long)]
        evolution: bool,
    },
}

pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

/// Config from file and environment, then flags.
pub fn resolve_config(global: &GlobalOpts, opts: &PipelineOpts) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = PipelineConfig::load(global.config.as_deref())?;
    if let Some(n) = global.parallel {
        cfg.parallelism = n;
    }
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if global.timestamps {
        cfg.report.timestamps = true;
    }
    let o = opts.clone();
    if let Some(m) = o.mode {
        cfg.translator.mode = m;
    }
    if let Some(n) = o.max_retries {
        cfg.translator.max_retries = n;
    }
    if let Some(n) = o.budget {
        cfg.translator.budget = n;
    }
    if o.kb.is_some() {
        cfg.translator.kb_path = o.kb;
    }
    if let Some(n) = o.depth_cap {
        cfg.slicer.depth_cap = n;
    }
    if let Some(e) = o.engine {
        cfg.verifier.engine = e;
    }
    if o.proverif.is_some() {
        cfg.verifier.external_path = o.proverif;
    }
    if let Some(n) = o.session_bound {
        cfg.verifier.session_bound = n;
    }
    if let Some(d) = o.out {
        cfg.report.dir = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one command, writing results to `out` and problems to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Exit {
    let g = &cli.global;
    let result = match &cli.command {
        Command::Scan { corpus } => cmd_scan(corpus, g.json, out),
        Command::Analyze { app, opts } => with_config(g, opts, err, |cfg| {
            let pipeline = Pipeline::new(cfg).map_err(|e| e.to_string())?;
            cmd_analyze(&pipeline, app, g.json, out)
        }),
        Command::Batch { corpus, opts } => with_config(g, opts, err, |cfg| {
            let pipeline = Pipeline::new(cfg).map_err(|e| e.to_string())?;
            cmd_batch(&pipeline, corpus, g.json, out)
        }),
        Command::Verify { model, opts } => with_config(g, opts, err, |cfg| cmd_verify(model, &cfg, g.json, out)),
        Command::Report { dir, group_by, evolution } => cmd_report(dir, *group_by, *evolution, g.json, out),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            Exit::Usage
        }
    }
}

fn with_config(
    g: &GlobalOpts,
    opts: &PipelineOpts,
    err: &mut dyn Write,
    f: impl FnOnce(PipelineConfig) -> Result<Exit, String>,
) -> Result<Exit, String> {
    match resolve_config(g, opts) {
        Ok(cfg) => f(cfg),
        Err(e) => {
            let _ = writeln!(err, "configuration: {e}");
            Ok(Exit::Usage)
        }
    }
}

fn emit_json<T: Serialize>(out: &mut dyn Write, v: &T) -> Result<(), String> {
    let text = serde_json::to_string_pretty(v).map_err(|e| e.to_string())?;
    writeln!(out, "{text}").map_err(|e| e.to_string())
}

fn put(out: &mut dyn Write, text: &str) -> Result<(), String> {
    out.write_all(text.as_bytes()).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct ScanEntry {
    pub dir: String,
    pub app_id: String,
    pub version_code: u64,
    pub category: String,
    pub downloads: String,
    pub source_units: usize,
}

pub fn cmd_scan(corpus: &Path, json: bool, out: &mut dyn Write) -> Result<Exit, String> {
    let dirs = app_dirs(corpus).map_err(|e| e.to_string())?;
    if dirs.is_empty() {
        return Err(format!("{} contains no app directories", corpus.display()));
    }
    let mut found = Vec::new();
    for dir in &dirs {
        match load_app(dir) {
            Ok(app) if is_ble_app(&app) => found.push(ScanEntry {
                dir: stem_of(dir),
                app_id: app.app_id.clone(),
                version_code: app.metadata.version_code,
                category: app.metadata.category.clone(),
                downloads: app.metadata.downloads_bucket.label().to_string(),
                source_units: app.source_units.len(),
            }),
            Ok(_) => {}
            Err(e) => tracing::warn!(dir = %dir.display(), error = %e, "skipped"),
        }
    }
    if json {
        emit_json(out, &found)?;
    } else {
        let mut text = format!("{:<40} {:>8} {:<20} {:>8}\n", "app", "version", "category", "sources");
        for e in &found {
            text.push_str(&format!("{:<40} {:>8} {:<20} {:>8}\n", e.dir, e.version_code, e.category, e.source_units));
        }
        text.push_str(&format!("{} of {} apps use BLE\n", found.len(), dirs.len()));
        put(out, &text)?;
    }
    Ok(Exit::Ok)
}

fn exit_for(report: &VulnReport) -> Exit {
    if report.pipeline_failure {
        Exit::Failure
    } else if report.secure {
        Exit::Ok
    } else {
        Exit::Insecure
    }
}

fn describe(report: &VulnReport) -> String {
    let p = &report.profile;
    let mut s = format!(
        "{}: {}\n  encryption={} nonce={} authentication={}\n",
        report.app_id,
        if report.pipeline_failure {
            "PIPELINE FAILURE"
        } else if report.secure {
            "secure"
        } else {
            "insecure"
        },
        p.encryption,
        p.nonce,
        p.authentication
    );
    if !report.attacks.is_empty() {
        let names: Vec<&str> = report.attacks.iter().map(|a| a.as_str()).collect();
        s.push_str(&format!("  attacks: {}\n", names.join(", ")));
    }
    for w in &report.warnings {
        s.push_str(&format!("  warning: {w}\n"));
    }
    s
}

pub fn cmd_analyze(pipeline: &Pipeline, app_dir: &Path, json: bool, out: &mut dyn Write) -> Result<Exit, String> {
    let app = load_app(app_dir).map_err(|e| e.to_string())?;
    let report = pipeline.analyze(&app);
    let path = write_report(&pipeline.config.report.dir, &stem_of(app_dir), &report).map_err(|e| e.to_string())?;
    if json {
        put(out, &report.to_json())?;
    } else {
        put(out, &describe(&report))?;
        put(out, &format!("  report: {}\n", path.display()))?;
    }
    Ok(exit_for(&report))
}

pub fn cmd_batch(pipeline: &Pipeline, corpus: &Path, json: bool, out: &mut dyn Write) -> Result<Exit, String> {
    let outcome = run_batch(pipeline, corpus, &pipeline.config.report.dir).map_err(|e| e.to_string())?;
    if json {
        put(out, &outcome.summary.to_json())?;
    } else {
        for (_, r) in &outcome.reports {
            put(out, &describe(r))?;
        }
        put(out, "\n")?;
        put(out, &render_combinations(&outcome.summary.overall))?;
        put(out, &format!("reports: {}\n", pipeline.config.report.dir.display()))?;
    }
    Ok(Exit::Ok)
}

fn verdict_line(v: &Verdict) -> String {
    let label = v.query.as_ref().map(|q| q.label()).unwrap_or_else(|| v.kind.to_string());
    let mut s = format!("{:<15} {:<15} {}", v.kind.to_string(), v.status.as_str(), label);
    if v.vacuous {
        s.push_str("  (vacuous)");
    }
    s.push('\n');
    if let Some(t) = &v.trace {
        s.push_str(&t.render());
    }
    for w in &v.warnings {
        s.push_str(&format!("  note: {w}\n"));
    }
    s
}

pub fn cmd_verify(model_path: &Path, cfg: &PipelineConfig, json: bool, out: &mut dyn Write) -> Result<Exit, String> {
    let src = std::fs::read_to_string(model_path).map_err(|e| format!("{}: {e}", model_path.display()))?;
    let model = match parse_valid(&src) {
        Ok(m) => m,
        Err(diags) => {
            if json {
                emit_json(out, &diags)?;
            } else {
                for d in &diags {
                    let loc = d.location.map(|(l, c)| format!("{l}:{c}: ")).unwrap_or_default();
                    put(out, &format!("{}:{loc}{d}\n", model_path.display()))?;
                }
            }
            return Ok(Exit::Usage);
        }
    };
    let verdicts: Vec<Verdict> = if model.queries.is_empty() {
        let kinds: BTreeSet<QueryKind> = [QueryKind::Secrecy, QueryKind::Freshness, QueryKind::Correspondence].into();
        verify_features(&model, &kinds, &cfg.verifier)
    } else {
        verify_model(&model, &cfg.verifier).into_iter().collect::<Result<_, _>>().map_err(|e| e.to_string())?
    };
    if json {
        emit_json(out, &verdicts)?;
    } else {
        for v in &verdicts {
            put(out, &verdict_line(v))?;
        }
    }
    let statuses: Vec<VerdictStatus> = verdicts.iter().map(|v| v.status).collect();
    Ok(if statuses.contains(&VerdictStatus::Violated) {
        Exit::Insecure
    } else if statuses.contains(&VerdictStatus::Unknown) {
        Exit::Failure
    } else {
        Exit::Ok
    })
}

pub fn cmd_report(dir: &Path, group_by: Dimension, evo: bool, json: bool, out: &mut dyn Write) -> Result<Exit, String> {
    let reports = load_reports(dir).map_err(|e| e.to_string())?;
    if evo {
        let (cols, rows) = evolution(&reports);
        if json {
            emit_json(out, &serde_json::json!({ "versions": cols, "apps": rows }))?;
        } else {
            put(out, &render_evolution(&cols, &rows))?;
        }
        return Ok(Exit::Ok);
    }
    let stats = aggregate_corpus(&reports, group_by).map_err(|e| format!("{}: {e}", dir.display()))?;
    if json {
        put(out, &stats.to_json())?;
    } else {
        put(out, &render_combinations(&stats))?;
        if group_by != Dimension::None {
            put(out, "\n")?;
            put(out, &render_groups(&stats))?;
        }
    }
    Ok(Exit::Ok)
}
