//! Slice-to-model translation with a retrieval-backed repair loop.
//!
//! Each attempt builds a prompt from the slice and the knowledge base, asks a
//! [`Generator`] for a model and validates it. Diagnostics from a failed
//! attempt drive retrieval for the next prompt.

mod fix;
mod generate;
mod kb;
mod prompt;
mod remote;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use fix::{apply_fix, FIX_ACTIONS};
pub use generate::{
    extract_model, fingerprint, template_source, Fingerprint, GenerateError, Generator, OfflineGenerator, AUTH_MARKERS,
    CRYPTO_MARKERS, NONCE_MARKERS, TEMPLATES,
};
pub use kb::{
    fenced_block, parse_entry, tokenize, Category, KbEntry, KbError, KnowledgeBase, BM25_B, BM25_K1, DEFAULT_TOP_K,
};
pub use prompt::{build_prompt, few_shot_pairs, FewShot, PromptBundle, PromptError, PromptOptions, RepairContext};
pub use remote::{RemoteConfig, RemoteGenerator, KEY_ENV, MODEL_ENV, URL_ENV};

use crate::pvlang::{diagnose, parse_valid, Diagnostic, PiModel};
use crate::slicer::BleSlice;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TranslatorConfig {
    pub max_retries: usize,
    pub prompt: PromptOptions,
}

impl Default for TranslatorConfig {
    fn default() -> Self {
        TranslatorConfig { max_retries: 5, prompt: PromptOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceRef {
    pub app_id: String,
    /// SHA-256 of the slice JSON, hex.
    pub slice_hash: String,
}

impl SliceRef {
    pub fn of(slice: &BleSlice) -> Self {
        let digest = Sha256::digest(slice.to_json().as_bytes());
        SliceRef { app_id: slice.app_id.clone(), slice_hash: hex::encode(digest) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub prompt: PromptBundle,
    pub raw_output: String,
    pub model_text: String,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum TranslationOutcome {
    Translated,
    RetriesExhausted,
    GenerationFailed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationSession {
    pub slice_ref: SliceRef,
    pub generator: String,
    pub attempts: Vec<Attempt>,
    #[serde(skip)]
    pub final_model: Option<PiModel>,
    /// Source text of the accepted model.
    pub final_text: Option<String>,
    pub retries_used: usize,
    pub outcome: TranslationOutcome,
}

impl TranslationSession {
    pub fn succeeded(&self) -> bool {
        self.outcome == TranslationOutcome::Translated
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslateError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Retrieval keys for a first attempt: the mechanisms spotted plus every
/// token of the slice, so entries keyed on API names match exactly.
pub fn slice_keys(slice: &BleSlice) -> BTreeSet<String> {
    let payload = slice.payload();
    let mut keys = fingerprint(&payload).keys();
    keys.extend(tokenize(&payload));
    keys
}

fn repair_keys(diags: &[Diagnostic]) -> BTreeSet<String> {
    diags.iter().map(|d| d.code.as_str().to_string()).collect()
}

pub fn translate_with_repair(
    slice: &BleSlice,
    generator: &dyn Generator,
    kb: &KnowledgeBase,
    config: &TranslatorConfig,
) -> Result<TranslationSession, TranslateError> {
    let mut session = TranslationSession {
        slice_ref: SliceRef::of(slice),
        generator: generator.name().to_string(),
        attempts: Vec::new(),
        final_model: None,
        final_text: None,
        retries_used: 0,
        outcome: TranslationOutcome::RetriesExhausted,
    };
    let mut keys = slice_keys(slice);
    let mut repair = None;
    for round in 0..=config.max_retries {
        let bundle = build_prompt(slice, kb, &keys, repair.take(), &config.prompt)?;
        let raw = match generator.generate(&bundle) {
            Ok(raw) => raw,
            Err(e) => {
                tracing::warn!(app = %slice.app_id, round, error = %e, "generation failed");
                session.attempts.push(Attempt {
                    prompt: bundle,
                    raw_output: String::new(),
                    model_text: String::new(),
                    diagnostics: Vec::new(),
                });
                session.outcome = TranslationOutcome::GenerationFailed { error: e.to_string() };
                break;
            }
        };
        let text = extract_model(&raw);
        let diagnostics = diagnose(&text);
        tracing::debug!(app = %slice.app_id, round, findings = diagnostics.len(), "attempt validated");
        let clean = diagnostics.is_empty();
        session.attempts.push(Attempt {
            prompt: bundle,
            raw_output: raw,
            model_text: text.clone(),
            diagnostics: diagnostics.clone(),
        });
        if clean {
            session.final_model = Some(parse_valid(&text).expect("diagnose found nothing"));
            session.final_text = Some(text);
            session.outcome = TranslationOutcome::Translated;
            break;
        }
        keys = repair_keys(&diagnostics);
        repair = Some(RepairContext { faulty: text, diagnostics });
    }
    session.retries_used = session.attempts.len().saturating_sub(1);
    Ok(session)
}
