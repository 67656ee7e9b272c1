use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::fix::apply_fix;
use super::kb::tokenize;
use super::prompt::PromptBundle;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("generation timed out after {0} s")]
    Timeout(u64),
    #[error("model returned an empty completion")]
    EmptyCompletion,
}

/// Something that turns a prompt into model text.
pub trait Generator: Send + Sync {
    fn generate(&self, prompt: &PromptBundle) -> Result<String, GenerateError>;

    fn name(&self) -> &str;
}

/// Security mechanisms spotted in source text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint {
    pub crypto: bool,
    pub nonce: bool,
    pub auth: bool,
}

pub const CRYPTO_MARKERS: &[&str] = &["cipher", "dofinal", "secretkeyspec", "encrypt", "decrypt", "aes"];
pub const NONCE_MARKERS: &[&str] = &["securerandom", "nonce", "random", "nextbytes"];
pub const AUTH_MARKERS: &[&str] = &["challenge", "authenticate", "auth", "mac", "hmac", "signature", "verify"];

/// Case-insensitive substring match of the markers inside identifier tokens.
pub fn fingerprint(source: &str) -> Fingerprint {
    let tokens: BTreeSet<String> = tokenize(source).into_iter().collect();
    let hit = |markers: &[&str]| tokens.iter().any(|t| markers.iter().any(|m| t.contains(m)));
    Fingerprint { crypto: hit(CRYPTO_MARKERS), nonce: hit(NONCE_MARKERS), auth: hit(AUTH_MARKERS) }
}

impl Fingerprint {
    pub fn template(self) -> &'static str {
        match (self.crypto, self.nonce, self.auth) {
            (false, false, false) => "plaintext",
            (true, false, false) => "enc_only",
            (false, true, false) => "nonce_only",
            (false, false, true) => "auth_only",
            (true, true, false) => "enc_nonce",
            (true, false, true) => "enc_auth",
            (false, true, true) => "nonce_auth",
            (true, true, true) => "challenge_response",
        }
    }

    /// Retrieval keys describing the mechanisms found.
    pub fn keys(self) -> BTreeSet<String> {
        let mut k = BTreeSet::new();
        if self.crypto {
            k.insert("encryption".to_string());
        }
        if self.nonce {
            k.insert("nonce".to_string());
        }
        if self.auth {
            k.insert("auth".to_string());
        }
        if k.is_empty() {
            k.insert("plaintext".to_string());
        }
        k
    }
}

pub const TEMPLATES: &[(&str, &str)] = &[
    ("plaintext", include_str!("../../templates/plaintext.pv")),
    ("enc_only", include_str!("../../templates/enc_only.pv")),
    ("nonce_only", include_str!("../../templates/nonce_only.pv")),
    ("auth_only", include_str!("../../templates/auth_only.pv")),
    ("enc_nonce", include_str!("../../templates/enc_nonce.pv")),
    ("enc_auth", include_str!("../../templates/enc_auth.pv")),
    ("nonce_auth", include_str!("../../templates/nonce_auth.pv")),
    ("challenge_response", include_str!("../../templates/challenge_response.pv")),
    ("static_key", include_str!("../../templates/static_key.pv")),
    ("replay_command", include_str!("../../templates/replay_command.pv")),
    ("applights", include_str!("../../templates/applights.pv")),
];

pub fn template_source(name: &str) -> Option<&'static str> {
    TEMPLATES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Model text from a completion: the first fenced block if there is one,
/// else the whole completion.
pub fn extract_model(completion: &str) -> String {
    if let Some(open) = completion.find("```") {
        let after = &completion[open + 3..];
        let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
        let body = &after[body_start..];
        let end = body.find("```").unwrap_or(body.len());
        return body[..end].to_string();
    }
    completion.to_string()
}

/// Deterministic stand-in for an LLM. First attempts pick a template from
/// the mechanisms in the slice; repair attempts apply the fixes named by the
/// retrieved error-recovery entries.
#[derive(Debug, Clone, Default)]
pub struct OfflineGenerator {
    /// Written into the model header.
    pub label: Option<String>,
}

impl OfflineGenerator {
    pub fn new() -> Self {
        Self::default()
    }

    fn first_attempt(&self, prompt: &PromptBundle) -> String {
        let fp = fingerprint(&prompt.slice_payload);
        let name = fp.template();
        let src = template_source(name).expect("every fingerprint has a template");
        let body = src.split_once('\n').map_or(src, |(_, rest)| rest);
        let label = self.label.as_deref().unwrap_or("offline");
        format!("(* {label}: {name} *)\n{body}")
    }

    fn repair(&self, prompt: &PromptBundle) -> String {
        let r = prompt.repair.as_ref().expect("repair prompt");
        let mut text = r.faulty.clone();
        for d in &r.diagnostics {
            let code = d.code.as_str();
            let Some(action) =
                prompt.retrieved_context.iter().filter(|e| e.keys.contains(code)).find_map(|e| e.fix.as_deref())
            else {
                tracing::debug!(code, "no retrieved fix");
                continue;
            };
            match apply_fix(action, &text, d) {
                Some(fixed) => text = fixed,
                None => tracing::debug!(code, action, "fix did not apply"),
            }
        }
        text
    }
}

impl Generator for OfflineGenerator {
    fn generate(&self, prompt: &PromptBundle) -> Result<String, GenerateError> {
        let model = match prompt.repair {
            None => self.first_attempt(prompt),
            Some(_) => self.repair(prompt),
        };
        Ok(format!("```pv\n{model}```\n"))
    }

    fn name(&self) -> &str {
        "offline"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extract_prefers_fence() {
        assert_eq!(extract_model("sure:\n```pv\nprocess 0\n```\nbye"), "process 0\n");
        assert_eq!(extract_model("process 0"), "process 0");
        assert_eq!(extract_model("```\nx\n"), "x\n");
    }

    #[test]
    fn substring_inside_identifier() {
        let fp = fingerprint("byte[] out = mCipher.doFinal(buf);");
        assert_eq!(fp, Fingerprint { crypto: true, nonce: false, auth: false });
        assert_eq!(fingerprint("writeCharacteristic(c)").template(), "plaintext");
    }
}
