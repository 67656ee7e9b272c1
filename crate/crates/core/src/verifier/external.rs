use std::path::Path;
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use super::verdict::{EngineKind, Verdict, VerdictStatus};
use super::VerifyError;
use crate::pvlang::{render, PiModel, QueryKind};

static FILE_SEQ: AtomicU64 = AtomicU64::new(0);

/// Renders the model, runs `<binary> <file.pv>` and maps each `RESULT` line
/// to the non-freshness queries in order. Freshness lives in a comment the
/// external tool never sees, so it gets no verdict here.
pub fn run_external(model: &PiModel, binary: &Path) -> Result<Vec<Verdict>, VerifyError> {
    if !binary.is_file() {
        return Err(VerifyError::ExternalToolNotFound(binary.display().to_string()));
    }
    let dir = std::env::temp_dir();
    let file = dir.join(format!("bleproof-{}-{}.pv", std::process::id(), FILE_SEQ.fetch_add(1, Ordering::Relaxed)));
    std::fs::write(&file, render(model)).map_err(|e| VerifyError::Io(e.to_string()))?;
    let output = Command::new(binary).arg(&file).output();
    let _ = std::fs::remove_file(&file);
    let output = output.map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
            VerifyError::ExternalToolNotFound(binary.display().to_string())
        }
        _ => VerifyError::Io(e.to_string()),
    })?;
    let stdout = String::from_utf8_lossy(&output.stdout).into_owned();
    let stderr = String::from_utf8_lossy(&output.stderr).into_owned();
    let parse_err = || VerifyError::ExternalParseError { raw_output: stdout.clone(), stderr: stderr.clone() };

    let results = parse_results(&stdout).ok_or_else(parse_err)?;
    let queries: Vec<_> = model.queries.iter().filter(|q| q.kind() != QueryKind::Freshness).collect();
    if !output.status.success() || results.len() != queries.len() {
        return Err(parse_err());
    }
    Ok(queries
        .into_iter()
        .zip(results)
        .map(|(q, status)| Verdict {
            kind: q.kind(),
            query: Some(q.clone()),
            status,
            vacuous: false,
            trace: None,
            engine: EngineKind::External,
            warnings: Vec::new(),
            cross_check: None,
            states_explored: 0,
        })
        .collect())
}

/// Statuses of the `RESULT` lines in order; `None` if a result line has an
/// unrecognized ending.
pub fn parse_results(stdout: &str) -> Option<Vec<VerdictStatus>> {
    let mut out = Vec::new();
    for line in stdout.lines().map(str::trim) {
        let Some(rest) = line.strip_prefix("RESULT ") else { continue };
        let status = if rest.ends_with(" is true.") {
            VerdictStatus::Holds
        } else if rest.ends_with(" is false.") {
            VerdictStatus::Violated
        } else if rest.ends_with(" cannot be proved.") {
            VerdictStatus::Unknown
        } else {
            return None;
        };
        out.push(status);
    }
    Some(out)
}
