//! Single-fault candidate models and scripted generators for the repair loop.

#![allow(dead_code)]

use bleproof_core::slicer::{BleSlice, SlicedMethod};
use bleproof_core::translator::{GenerateError, Generator, OfflineGenerator, PromptBundle};

pub fn handshake_slice() -> BleSlice {
    let methods = vec![
        method("Lock.onChallenge", "byte[] r = cipher.doFinal(nonce); gatt.writeCharacteristic(r);", 0),
        method("Lock.init", "SecureRandom rng = new SecureRandom();", 1),
    ];
    let total_chars = methods.iter().map(|m| m.body.len()).sum();
    BleSlice { app_id: "com.example.lock".into(), anchors: vec!["Lock.onChallenge".into()], methods, total_chars }
}

fn method(name: &str, body: &str, distance: usize) -> SlicedMethod {
    SlicedMethod { name: name.into(), body: body.into(), callees: Vec::new(), distance }
}

/// Returns `first` on the initial attempt, then defers to the offline repairer.
pub struct Seeded {
    pub first: String,
    pub inner: OfflineGenerator,
}

impl Generator for Seeded {
    fn generate(&self, prompt: &PromptBundle) -> Result<String, GenerateError> {
        match prompt.repair {
            None => Ok(self.first.clone()),
            Some(_) => self.inner.generate(prompt),
        }
    }

    fn name(&self) -> &str {
        "seeded"
    }
}

// (fixture, text edit that a person would make to fix it)
pub const REPAIRS: &[(&str, &str, &str)] = &[
    ("arity_constructor", "senc(s))", "senc(s, k))"),
    ("destructor_in_output", "out(c, sdec(senc(s, k), k))", "let v = sdec(senc(s, k), k) in out(c, v) else 0"),
    ("duplicate_free", "free c: channel.\nfree c: channel.", "free c: channel."),
    ("missing_else", "event end_auth(y)\n", "event end_auth(y) else 0\n"),
    ("not_channel", "out(s,", "out(c,"),
    ("query_undeclared_event", "event end_auth(bitstring).", "event end_auth(bitstring).\nevent start(bitstring)."),
    ("reduc_unbound_rhs", "kk: key, z: bitstring; sdec(senc(m, kk), kk) = z", "kk: key; sdec(senc(m, kk), kk) = m"),
    ("syntax_unclosed_paren", "else 0\n    )\n", "else 0\n    )\n)"),
    ("undeclared_event", "event end_auth(bitstring).", "event end_auth(bitstring).\nevent done(bitstring)."),
    ("undeclared_name", "free k: key [private].", "free k: key [private].\nfree t: bitstring [private]."),
    ("undeclared_type", "type key.", "type nonce.\ntype key."),
];

impl Seeded {
    pub fn new(first: String) -> Self {
        Seeded { first, inner: OfflineGenerator::new() }
    }
}

pub struct Garbage;

impl Generator for Garbage {
    fn generate(&self, _: &PromptBundle) -> Result<String, GenerateError> {
        Ok("I could not produce a model (((".into())
    }

    fn name(&self) -> &str {
        "garbage"
    }
}
