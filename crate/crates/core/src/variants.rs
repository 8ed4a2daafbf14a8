//! Contradictory-variant construction for provable theorems.
//!
//! Each provable record is negated through the variant-construction template,
//! yielding a disprovable twin and doubling the trainable statement pool.
//! Ground-truth labels for variants are derived, never asserted: an entailing
//! variant inherits its parent's label, a contradictory one inverts it.

use crate::corpus::{derived_label, BenchmarkCase, Record, Relationship, TheoremRecord, VariantRecord};
use crate::prompts;
use crate::providers::{parallel_map, ChatProvider, ChatRequest, ProviderError};
use serde::{Deserialize, Serialize};
use serde_json::Map;
use thiserror::Error;

/// How far back from the end of a solution the disproved marker may sit.
/// Tolerant of trailing whitespace while still strict on the verdict.
pub const SUFFIX_WINDOW_CHARS: usize = 200;

#[derive(Debug, Error)]
pub enum VariantError {
    #[error("reply is missing the fenced `{0}` block")]
    MissingBlock(&'static str),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// A raw generation before it becomes a [`VariantRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantGeneration {
    pub parent_id: String,
    pub new_question: String,
    pub new_solution: String,
    pub relationship: Relationship,
    /// True when the new solution's final boxed token is "disproved".
    pub expected_suffix_ok: bool,
}

/// A generation that could not become a variant, kept for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarantineEntry {
    pub parent_id: String,
    pub reason: String,
}

impl Record for QuarantineEntry {
    const KIND: &'static str = "quarantine entry";

    fn id(&self) -> &str {
        &self.parent_id
    }

    fn validate(&self) -> Vec<String> {
        if self.parent_id.is_empty() {
            vec!["parent_id is empty".to_owned()]
        } else {
            Vec::new()
        }
    }
}

/// Provider and sampling settings for variant generation.
pub struct VariantContext<'a> {
    pub provider: &'a dyn ChatProvider,
    pub model: &'a str,
    pub temperature: f64,
    pub max_output_tokens: Option<u32>,
}

impl<'a> VariantContext<'a> {
    pub fn new(provider: &'a dyn ChatProvider, model: &'a str) -> Self {
        VariantContext {
            provider,
            model,
            temperature: 0.0,
            max_output_tokens: None,
        }
    }
}

/// The truth label a variant must carry: entailment preserves the parent's
/// label, contradiction inverts it.
pub fn derive_truth_label(parent_label: bool, relationship: Relationship) -> bool {
    derived_label(parent_label, relationship)
}

/// Extracts the content of the last complete fenced block labeled `label`
/// (marker line ```label, closed by ```). Trimmed; None when absent.
fn extract_block(text: &str, label: &str) -> Option<String> {
    let open = format!("```{label}");
    let mut result = None;
    let mut cursor = 0;
    while let Some(found) = text[cursor..].find(&open) {
        let after = cursor + found + open.len();
        let line_end = match text[after..].find('\n') {
            Some(nl) => after + nl,
            None => break,
        };
        // The marker must occupy the whole line (rules out ```questionable).
        if !text[after..line_end].trim().is_empty() {
            cursor = after;
            continue;
        }
        let content_start = line_end + 1;
        match text[content_start..].find("```") {
            Some(close) => {
                result = Some(text[content_start..content_start + close].trim().to_owned());
                cursor = content_start + close + 3;
            }
            None => break,
        }
    }
    result
}

/// The last complete `\boxed{...}` token in `text`, trimmed and lowercased.
fn last_boxed_token(text: &str) -> Option<String> {
    const MARKER: &str = "\\boxed{";
    let mut token = None;
    let mut cursor = 0;
    while let Some(found) = text[cursor..].find(MARKER) {
        let start = cursor + found + MARKER.len();
        let mut depth = 1usize;
        let mut end = None;
        for (offset, ch) in text[start..].char_indices() {
            match ch {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(start + offset);
                        break;
                    }
                }
                _ => {}
            }
        }
        match end {
            Some(end) => {
                token = Some(text[start..end].trim().to_lowercase());
                cursor = end + 1;
            }
            None => cursor = start,
        }
    }
    token
}

/// True when the final boxed token within the solution's last
/// [`SUFFIX_WINDOW_CHARS`] characters is "disproved".
pub fn has_disproved_suffix(solution: &str) -> bool {
    let start = solution
        .char_indices()
        .rev()
        .nth(SUFFIX_WINDOW_CHARS - 1)
        .map(|(index, _)| index)
        .unwrap_or(0);
    last_boxed_token(&solution[start..]).as_deref() == Some("disproved")
}

/// Negates one provable (question, solution) pair through the
/// variant-construction template. A reply missing either fenced block is a
/// generation failure; a solution without the disproved suffix comes back
/// with `expected_suffix_ok = false` so the caller can quarantine it.
pub fn generate_contradictory(
    ctx: &VariantContext,
    parent_id: &str,
    question: &str,
    solution: &str,
) -> Result<VariantGeneration, VariantError> {
    let response = ctx.provider.chat(&ChatRequest {
        system_prompt: None,
        user_prompt: prompts::variant_construction(question, solution),
        model: ctx.model.to_owned(),
        temperature: ctx.temperature,
        max_output_tokens: ctx.max_output_tokens,
    })?;
    let new_question =
        extract_block(&response.text, "question").ok_or(VariantError::MissingBlock("question"))?;
    let new_solution =
        extract_block(&response.text, "solution").ok_or(VariantError::MissingBlock("solution"))?;
    let expected_suffix_ok = has_disproved_suffix(&new_solution);
    Ok(VariantGeneration {
        parent_id: parent_id.to_owned(),
        new_question,
        new_solution,
        relationship: Relationship::Contradicts,
        expected_suffix_ok,
    })
}

/// One contradictory variant per provable record; failures are quarantined.
pub struct ExpansionReport {
    pub variants: Vec<VariantRecord>,
    pub quarantine: Vec<QuarantineEntry>,
}

/// Expands a curated corpus: every record with `truth_label = true` yields
/// one Contradicts variant (id `<parent>/v1`, label false); disprovable
/// records already serve as negatives and are skipped. Generation failures
/// and wrong-suffix replies land in quarantine instead of aborting the run.
/// Both outputs are sorted by parent id, so replayed runs are byte-identical.
pub fn expand_dataset(
    ctx: &VariantContext,
    records: &[TheoremRecord],
    workers: usize,
) -> ExpansionReport {
    let provable: Vec<&TheoremRecord> = records
        .iter()
        .filter(|record| record.truth_label)
        .collect();
    let outcomes = parallel_map(&provable, workers, |record| {
        generate_contradictory(ctx, &record.id, &record.theorem, &record.proof)
    });
    let mut variants = Vec::new();
    let mut quarantine = Vec::new();
    for (record, outcome) in provable.iter().zip(outcomes) {
        match outcome {
            Ok(generation) if generation.expected_suffix_ok => {
                variants.push(VariantRecord {
                    id: format!("{}/v1", record.id),
                    parent_id: record.id.clone(),
                    statement: generation.new_question,
                    relationship: Relationship::Contradicts,
                    truth_label: derive_truth_label(record.truth_label, Relationship::Contradicts),
                    proof: Some(generation.new_solution),
                    extra: Map::new(),
                });
            }
            Ok(_) => quarantine.push(QuarantineEntry {
                parent_id: record.id.clone(),
                reason: "new solution does not end with the boxed disproved marker".to_owned(),
            }),
            Err(error) => quarantine.push(QuarantineEntry {
                parent_id: record.id.clone(),
                reason: error.to_string(),
            }),
        }
    }
    variants.sort_by(|a, b| a.parent_id.cmp(&b.parent_id));
    quarantine.sort_by(|a, b| a.parent_id.cmp(&b.parent_id));
    ExpansionReport {
        variants,
        quarantine,
    }
}

/// Checks an authored benchmark case: every variant's stored label must equal
/// the derived one, and all statement strings (original included) must be
/// pairwise distinct. Returns the list of violations; empty means consistent.
pub fn check_case_consistency(case: &BenchmarkCase) -> Vec<String> {
    let mut violations = Vec::new();
    for variant in &case.variants {
        let expected = derive_truth_label(case.original.truth_label, variant.relationship);
        if variant.truth_label != expected {
            violations.push(format!(
                "variant `{}`: stored truth_label {} but {:?} of an original with label {} derives {}",
                variant.id, variant.truth_label, variant.relationship,
                case.original.truth_label, expected,
            ));
        }
    }
    let mut statements: Vec<(&str, String)> = vec![(case.original.statement.as_str(), {
        format!("original `{}`", case.id)
    })];
    for variant in &case.variants {
        statements.push((variant.statement.as_str(), format!("variant `{}`", variant.id)));
    }
    for (i, (statement, who)) in statements.iter().enumerate() {
        for (other_statement, other_who) in &statements[i + 1..] {
            if statement == other_statement {
                violations.push(format!(
                    "{who} and {other_who} share the same statement text"
                ));
            }
        }
    }
    violations
}
