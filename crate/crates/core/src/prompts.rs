//! Prompt templates and placeholder rendering.
//!
//! Templates live as plain-text assets under `prompts/` and are embedded at
//! compile time. Each template names its own placeholder tokens (the
//! `***name***` style for the annotation prompts, `<name>` for the variant
//! and process prompts); [`render`] substitutes them in a single left-to-right
//! pass so substituted values are never re-scanned for tokens.

/// Judge prompt deciding whether two theorem statements are the same.
pub const CONTAMINATION: &str = include_str!("../prompts/contamination.txt");
/// Classifier prompt separating theorem-proving from question-answering.
pub const THEOREM_JUSTIFICATION: &str = include_str!("../prompts/theorem_justification.txt");
/// Extracts a rationale and formal theorem statement from a discussion.
pub const RATIONALE_SUMMARIZATION: &str = include_str!("../prompts/rationale_summarization.txt");
/// Produces a proof (or disproof) for a summarized theorem.
pub const PROOF_GENERATION: &str = include_str!("../prompts/proof_generation.txt");
/// Step-by-step validity check of a proof or disproof.
pub const LOGICAL_VALIDATION: &str = include_str!("../prompts/logical_validation.txt");
/// Difficulty rating on a 0.5 grid with competition references.
pub const DIFFICULTY_ANNOTATION: &str = include_str!("../prompts/difficulty_annotation.txt");
/// Topic classification into ` -> `-separated domain chains.
pub const TOPIC_ANNOTATION: &str = include_str!("../prompts/topic_annotation.txt");
/// Single-claim filter. This template is authored by this project rather than
/// taken from the annotation suite the others belong to.
pub const SINGLE_STATEMENT: &str = include_str!("../prompts/single_statement.txt");
/// Rewrites a provable question into a contradictory variant.
pub const VARIANT_CONSTRUCTION: &str = include_str!("../prompts/variant_construction.txt");
/// System prompt used when sampling prove/disprove rollouts.
pub const RL_SYSTEM: &str = include_str!("../prompts/rl_system.txt");
/// Four-criterion rubric for grading proof quality.
pub const PROCESS_EVALUATION: &str = include_str!("../prompts/process_evaluation.txt");

/// Replaces placeholder tokens in one pass. The earliest token occurrence is
/// substituted first; scanning resumes after the substituted value, so values
/// containing placeholder-like text are left untouched.
pub fn render(template: &str, substitutions: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while !rest.is_empty() {
        let mut earliest: Option<(usize, usize)> = None;
        for (index, (token, _)) in substitutions.iter().enumerate() {
            if token.is_empty() {
                continue;
            }
            if let Some(pos) = rest.find(token) {
                if earliest.is_none_or(|(best, _)| pos < best) {
                    earliest = Some((pos, index));
                }
            }
        }
        match earliest {
            Some((pos, index)) => {
                let (token, value) = substitutions[index];
                out.push_str(&rest[..pos]);
                out.push_str(value);
                rest = &rest[pos + token.len()..];
            }
            None => {
                out.push_str(rest);
                break;
            }
        }
    }
    out
}

pub fn contamination(original: &str, candidate: &str) -> String {
    render(
        CONTAMINATION,
        &[("***theorem1***", original), ("***theorem2***", candidate)],
    )
}

pub fn theorem_justification(problem: &str, solution: &str) -> String {
    render(
        THEOREM_JUSTIFICATION,
        &[("***problem***", problem), ("***solution***", solution)],
    )
}

pub fn rationale_summarization(problem: &str, solution: &str) -> String {
    render(
        RATIONALE_SUMMARIZATION,
        &[("***problem***", problem), ("***solution***", solution)],
    )
}

pub fn proof_generation(problem: &str, solution: &str, theorem: &str) -> String {
    render(
        PROOF_GENERATION,
        &[
            ("***problem***", problem),
            ("***solution***", solution),
            ("***theorem***", theorem),
        ],
    )
}

pub fn logical_validation(theorem: &str, proof: &str) -> String {
    render(
        LOGICAL_VALIDATION,
        &[("***theorem***", theorem), ("***Proof***", proof)],
    )
}

pub fn difficulty_annotation(question: &str, solution: &str, source: &str) -> String {
    render(
        DIFFICULTY_ANNOTATION,
        &[
            ("***Question***", question),
            ("***Solution***", solution),
            ("***SOURCE***", source),
        ],
    )
}

pub fn topic_annotation(question: &str, solution: &str, source: &str) -> String {
    render(
        TOPIC_ANNOTATION,
        &[
            ("***Question***", question),
            ("***Solution***", solution),
            ("***Source***", source),
        ],
    )
}

pub fn single_statement(theorem: &str) -> String {
    render(SINGLE_STATEMENT, &[("***theorem***", theorem)])
}

pub fn variant_construction(question: &str, solution: &str) -> String {
    render(
        VARIANT_CONSTRUCTION,
        &[("<question>", question), ("<solution>", solution)],
    )
}

pub fn process_evaluation(question: &str, ground_truth: &str, solution: &str) -> String {
    render(
        PROCESS_EVALUATION,
        &[
            ("<question>", question),
            ("<answer>", ground_truth),
            ("<solution>", solution),
        ],
    )
}
