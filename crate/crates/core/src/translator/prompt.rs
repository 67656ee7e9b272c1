use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::kb::{fenced_block, Category, KbEntry, KnowledgeBase};
use crate::pvlang::Diagnostic;
use crate::slicer::BleSlice;

pub const SYSTEM_PREAMBLE: &str = "You translate Android BLE client code into a ProVerif model. \
Model the phone app and the BLE device as two replicated processes on a public channel `c`. \
Answer with a single ```pv fenced block containing the whole model and nothing else.";

const FALLBACK_COT: &str = "Identify each BLE write and read, decide whether its payload is encrypted, \
bound to a nonce or authenticated, then declare everything before writing the processes.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShot {
    pub java: String,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairContext {
    pub faulty: String,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_preamble: String,
    pub cot_instructions: String,
    pub few_shot_pairs: Vec<FewShot>,
    pub retrieved_context: Vec<KbEntry>,
    pub slice_payload: String,
    pub methods_included: usize,
    pub methods_total: usize,
    pub repair: Option<RepairContext>,
    pub char_budget: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptOptions {
    pub char_budget: usize,
    pub top_k: usize,
    /// Few-shot pairs wanted; the first one is mandatory when this is non-zero.
    pub few_shot: usize,
}

impl Default for PromptOptions {
    fn default() -> Self {
        PromptOptions { char_budget: 16_000, top_k: super::kb::DEFAULT_TOP_K, few_shot: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("prompt budget of {budget} chars is below the {required} chars that are mandatory")]
    BudgetTooSmall { budget: usize, required: usize },
    #[error("slice has no methods")]
    EmptySlice,
    #[error(transparent)]
    Kb(#[from] KbErrorText),
}

/// Knowledge-base failure carried as text so the error stays `Clone`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct KbErrorText(pub String);

impl PromptBundle {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("## Role\n");
        out.push_str(&self.system_preamble);
        out.push_str("\n\n## Steps\n");
        out.push_str(&self.cot_instructions);
        out.push('\n');
        for (i, fs) in self.few_shot_pairs.iter().enumerate() {
            out.push_str(&format!("\n## Example {}\n```java\n{}```\n```pv\n{}```\n", i + 1, fs.java, fs.model));
        }
        if !self.retrieved_context.is_empty() {
            out.push_str("\n## Reference\n");
            for e in &self.retrieved_context {
                out.push_str(&format!("### {}\n{}\n", e.id, e.body));
            }
        }
        out.push_str("\n## Code\n");
        out.push_str(&self.slice_payload);
        if self.methods_included < self.methods_total {
            out.push_str(&truncation_note(self.methods_total - self.methods_included, self.methods_total));
        }
        if let Some(r) = &self.repair {
            out.push_str("\n## Previous attempt\n```pv\n");
            out.push_str(&r.faulty);
            if !r.faulty.ends_with('\n') {
                out.push('\n');
            }
            out.push_str("```\n## Diagnostics\n");
            for d in &r.diagnostics {
                out.push_str(&serde_json::to_string(d).expect("diagnostic serializes"));
                out.push('\n');
            }
            out.push_str("Fix every diagnostic and return the whole corrected model.\n");
        }
        out
    }

    pub fn rendered_len(&self) -> usize {
        self.render().chars().count()
    }
}

fn truncation_note(omitted: usize, total: usize) -> String {
    format!("// {omitted} of {total} methods omitted\n")
}

fn method_text(m: &crate::slicer::SlicedMethod) -> String {
    format!("// {}\n{}\n\n", m.name, m.body)
}

pub fn few_shot_pairs(kb: &KnowledgeBase) -> Vec<FewShot> {
    kb.by_category(Category::BestPractices)
        .filter_map(|e| {
            Some(FewShot {
                java: fenced_block(&e.body, "java")?.to_string(),
                model: fenced_block(&e.body, "pv")?.to_string(),
            })
        })
        .collect()
}

fn cot(kb: &KnowledgeBase) -> String {
    kb.by_category(Category::BestPractices)
        .find(|e| fenced_block(&e.body, "java").is_none() && e.keys.contains("steps"))
        .map(|e| e.body.clone())
        .unwrap_or_else(|| FALLBACK_COT.to_string())
}

/// Assembles a prompt within `opts.char_budget` characters.
///
/// Mandatory: preamble, steps, the first few-shot pair, the repair section,
/// the first (closest) method and the truncation note. Then, in order:
/// further methods by distance, reference entries by rank, further few-shot
/// pairs. In repair mode reference entries come before further methods,
/// since they carry the fixes.
pub fn build_prompt(
    slice: &BleSlice,
    kb: &KnowledgeBase,
    query_keys: &std::collections::BTreeSet<String>,
    repair: Option<RepairContext>,
    opts: &PromptOptions,
) -> Result<PromptBundle, PromptError> {
    if slice.methods.is_empty() {
        return Err(PromptError::EmptySlice);
    }
    let context: Vec<KbEntry> = if kb.is_empty() {
        Vec::new()
    } else {
        kb.retrieve_context(query_keys, opts.top_k)
            .map_err(|e| KbErrorText(e.to_string()))?
            .into_iter()
            .cloned()
            .collect()
    };
    let pairs = few_shot_pairs(kb);
    let total = slice.methods.len();
    let mut bundle = PromptBundle {
        system_preamble: SYSTEM_PREAMBLE.to_string(),
        cot_instructions: cot(kb),
        few_shot_pairs: pairs.iter().take(opts.few_shot.min(1)).cloned().collect(),
        retrieved_context: Vec::new(),
        slice_payload: method_text(&slice.methods[0]),
        methods_included: 1,
        methods_total: total,
        repair,
        char_budget: opts.char_budget,
    };
    // with one method in, the truncation note is already at its longest
    let required = bundle.rendered_len();
    if required > opts.char_budget {
        return Err(PromptError::BudgetTooSmall { budget: opts.char_budget, required });
    }
    let fits = |b: &PromptBundle| b.rendered_len() <= opts.char_budget;

    let add_methods = |b: &mut PromptBundle| {
        while b.methods_included < total {
            let mut next = b.clone();
            next.slice_payload.push_str(&method_text(&slice.methods[b.methods_included]));
            next.methods_included += 1;
            if !fits(&next) {
                break;
            }
            *b = next;
        }
    };
    let add_context = |b: &mut PromptBundle| {
        for e in &context {
            let mut next = b.clone();
            next.retrieved_context.push(e.clone());
            if !fits(&next) {
                break;
            }
            *b = next;
        }
    };
    if bundle.repair.is_some() {
        add_context(&mut bundle);
        add_methods(&mut bundle);
    } else {
        add_methods(&mut bundle);
        add_context(&mut bundle);
    }
    for fs in pairs.iter().take(opts.few_shot).skip(1) {
        let mut next = bundle.clone();
        next.few_shot_pairs.push(fs.clone());
        if !fits(&next) {
            break;
        }
        bundle = next;
    }
    Ok(bundle)
}
