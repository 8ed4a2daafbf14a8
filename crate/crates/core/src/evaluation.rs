//! Outcome and process evaluation of model solutions.
//!
//! Outcome evaluation is verdict-based and fully deterministic: a case passes
//! only if every statement gets an explicit verdict, the original's verdict
//! matches its truth label, entailing variants agree with the original, and
//! contradicting variants invert it. The analytic random-guessing baseline
//! accompanies every score. Process evaluation asks an LLM judge to grade the
//! proof itself on a fixed four-criterion rubric; the judge's own total is
//! discarded and recomputed from the subscores.

use crate::corpus::{BenchmarkCase, Record, Relationship};
use crate::prompts;
use crate::providers::{parallel_map, parse_json_payload, ChatProvider, ChatRequest};
use crate::reward::{extract_verdict, Verdict};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("benchmark contains no cases")]
    EmptyBenchmark,
    #[error("no process scores to aggregate")]
    NoScores,
}

/// One model answer, keyed by the statement it addresses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub statement_id: String,
    pub text: String,
}

impl Record for Solution {
    const KIND: &'static str = "solution";

    fn id(&self) -> &str {
        &self.statement_id
    }

    fn validate(&self) -> Vec<String> {
        if self.statement_id.is_empty() {
            vec!["statement_id is empty".to_owned()]
        } else {
            Vec::new()
        }
    }
}

/// Indexes solutions by statement id for joining against benchmark cases.
pub fn solution_map(solutions: &[Solution]) -> BTreeMap<String, String> {
    solutions
        .iter()
        .map(|s| (s.statement_id.clone(), s.text.clone()))
        .collect()
}

/// The four outcome criteria; a case passes only when all hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseCriteria {
    /// Every statement's solution produces an explicit verdict.
    pub verdicts_present: bool,
    /// The original's verdict matches its truth label.
    pub original_correct: bool,
    /// Every entailing variant's verdict equals the original's.
    pub entails_consistent: bool,
    /// Every contradicting variant's verdict is the original's inverse.
    pub contradicts_inverted: bool,
}

impl CaseCriteria {
    pub fn all(&self) -> bool {
        self.verdicts_present
            && self.original_correct
            && self.entails_consistent
            && self.contradicts_inverted
    }

    /// Names of the criteria that failed, for the report histogram.
    pub fn failed_names(&self) -> Vec<&'static str> {
        let mut failed = Vec::new();
        if !self.verdicts_present {
            failed.push("verdicts_present");
        }
        if !self.original_correct {
            failed.push("original_correct");
        }
        if !self.entails_consistent {
            failed.push("entails_consistent");
        }
        if !self.contradicts_inverted {
            failed.push("contradicts_inverted");
        }
        failed
    }
}

/// The outcome judgment for one benchmark case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseJudgment {
    pub case_id: String,
    pub per_statement_verdicts: Vec<(String, Verdict)>,
    pub criteria: CaseCriteria,
    pub passed: bool,
}

/// Judges one case against a solution map. A missing solution entry counts
/// as verdict None, exactly like a solution that never states a verdict.
pub fn judge_case(case: &BenchmarkCase, solutions: &BTreeMap<String, String>) -> CaseJudgment {
    let verdict_for = |id: &str| {
        solutions
            .get(id)
            .map(|text| extract_verdict(text))
            .unwrap_or(Verdict::None)
    };
    let original_verdict = verdict_for(&case.id);
    let mut per_statement_verdicts = vec![(case.id.clone(), original_verdict)];
    let mut verdicts_present = original_verdict != Verdict::None;
    let mut entails_consistent = true;
    let mut contradicts_inverted = true;
    for variant in &case.variants {
        let verdict = verdict_for(&variant.id);
        per_statement_verdicts.push((variant.id.clone(), verdict));
        if verdict == Verdict::None {
            verdicts_present = false;
        }
        match variant.relationship {
            Relationship::Entails => {
                if verdict != original_verdict {
                    entails_consistent = false;
                }
            }
            Relationship::Contradicts => {
                if verdict != original_verdict.inverted() {
                    contradicts_inverted = false;
                }
            }
        }
    }
    let criteria = CaseCriteria {
        verdicts_present,
        original_correct: original_verdict.matches_label(case.original.truth_label),
        entails_consistent,
        contradicts_inverted,
    };
    CaseJudgment {
        case_id: case.id.clone(),
        passed: criteria.all(),
        per_statement_verdicts,
        criteria,
    }
}

/// Percentage of cases passing all four criteria.
pub fn outcome_score(
    benchmark: &[BenchmarkCase],
    solutions: &BTreeMap<String, String>,
) -> Result<f64, EvalError> {
    if benchmark.is_empty() {
        return Err(EvalError::EmptyBenchmark);
    }
    let passed = benchmark
        .iter()
        .filter(|case| judge_case(case, solutions).passed)
        .count();
    Ok(100.0 * passed as f64 / benchmark.len() as f64)
}

/// Expected outcome score of a uniform random verdict guesser: a case with
/// v variants has 1 + v statements and passes with probability 2^-(1+v), so
/// the baseline is 100 x the mean of those probabilities.
pub fn random_accuracy(benchmark: &[BenchmarkCase]) -> Result<f64, EvalError> {
    if benchmark.is_empty() {
        return Err(EvalError::EmptyBenchmark);
    }
    let mean = benchmark
        .iter()
        .map(|case| 0.5_f64.powi(1 + case.variants.len() as i32))
        .sum::<f64>()
        / benchmark.len() as f64;
    Ok(100.0 * mean)
}

/// A rubric-weighted grade for one proof.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessScore {
    /// Recomputed weighted sum; the judge's own total is discarded.
    pub score: f64,
    pub validity: f64,
    pub completeness: f64,
    pub correctness: f64,
    pub clarity: f64,
    pub explanation: String,
}

impl ProcessScore {
    /// Clamps each subscore to [0, 1] and recomputes the weighted total
    /// (validity 40%, completeness 30%, correctness 20%, clarity 10%). The
    /// integer-weighted form keeps e.g. all-ones at exactly 1.0.
    pub fn from_subscores(
        validity: f64,
        completeness: f64,
        correctness: f64,
        clarity: f64,
        explanation: String,
    ) -> ProcessScore {
        let validity = validity.clamp(0.0, 1.0);
        let completeness = completeness.clamp(0.0, 1.0);
        let correctness = correctness.clamp(0.0, 1.0);
        let clarity = clarity.clamp(0.0, 1.0);
        ProcessScore {
            score: (4.0 * validity + 3.0 * completeness + 2.0 * correctness + clarity) / 10.0,
            validity,
            completeness,
            correctness,
            clarity,
            explanation,
        }
    }
}

/// Judge provider and settings for process evaluation. Temperature is fixed
/// at 0: a single deterministic judge call per item, no voting.
pub struct ProcessContext<'a> {
    pub provider: &'a dyn ChatProvider,
    pub model: &'a str,
    pub max_output_tokens: Option<u32>,
}

impl<'a> ProcessContext<'a> {
    pub fn new(provider: &'a dyn ChatProvider, model: &'a str) -> Self {
        ProcessContext {
            provider,
            model,
            max_output_tokens: None,
        }
    }
}

fn numeric_field(payload: &Map<String, Value>, key: &str) -> Result<f64, String> {
    let value = match payload.get(key) {
        Some(Value::Number(n)) => n
            .as_f64()
            .ok_or_else(|| format!("`{key}` {n} is not representable"))?,
        Some(Value::String(s)) => s
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("`{key}` {s:?} is not numeric"))?,
        Some(other) => return Err(format!("`{key}` is {other:?}, expected a number")),
        None => return Err(format!("missing key `{key}`")),
    };
    if !value.is_finite() {
        return Err(format!("`{key}` is not finite"));
    }
    Ok(value)
}

/// Grades one solution through the process-evaluation template. The outer
/// error is an unusable judge interaction (network failure or an unparseable
/// reply); such items are excluded from the mean but counted in the report.
pub fn score_process(
    ctx: &ProcessContext,
    question: &str,
    ground_truth_label: bool,
    solution: &str,
) -> Result<ProcessScore, String> {
    let ground_truth = if ground_truth_label { "proved" } else { "disproved" };
    let mut request = ChatRequest::new(
        ctx.model,
        prompts::process_evaluation(question, ground_truth, solution),
    );
    request.max_output_tokens = ctx.max_output_tokens;
    let response = ctx.provider.chat(&request).map_err(|e| e.to_string())?;
    let payload = parse_json_payload(&response.text).map_err(|e| e.to_string())?;
    let validity = numeric_field(&payload, "validity")?;
    let completeness = numeric_field(&payload, "completeness")?;
    let correctness = numeric_field(&payload, "correctness")?;
    let clarity = numeric_field(&payload, "clarity")?;
    let explanation = match payload.get("explanation") {
        Some(Value::String(s)) => s.clone(),
        _ => String::new(),
    };
    Ok(ProcessScore::from_subscores(
        validity,
        completeness,
        correctness,
        clarity,
        explanation,
    ))
}

/// 100 x the arithmetic mean of per-item process scores.
pub fn aggregate_process(scores: &[f64]) -> Result<f64, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::NoScores);
    }
    Ok(100.0 * scores.iter().sum::<f64>() / scores.len() as f64)
}

/// A successfully graded item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub statement_id: String,
    #[serde(flatten)]
    pub score: ProcessScore,
}

/// An item the judge could not grade, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedItem {
    pub statement_id: String,
    pub reason: String,
}

/// Process evaluation over a whole benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessReport {
    pub scored: Vec<ScoredItem>,
    pub failures: Vec<FailedItem>,
    /// 100 x mean over scored items; None when nothing could be scored.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<f64>,
}

/// Grades every statement (original and variants) that has a solution. A
/// missing solution, a judge failure, or an unparseable reply marks the item
/// failed without aborting the rest of the run.
pub fn evaluate_process(
    ctx: &ProcessContext,
    cases: &[BenchmarkCase],
    solutions: &BTreeMap<String, String>,
    workers: usize,
) -> ProcessReport {
    let mut items: Vec<(String, String, bool)> = Vec::new();
    for case in cases {
        items.push((
            case.id.clone(),
            case.original.statement.clone(),
            case.original.truth_label,
        ));
        for variant in &case.variants {
            items.push((
                variant.id.clone(),
                variant.statement.clone(),
                variant.truth_label,
            ));
        }
    }
    let results = parallel_map(&items, workers, |(id, statement, label)| {
        match solutions.get(id) {
            Some(solution) => score_process(ctx, statement, *label, solution),
            None => Err("no solution provided".to_owned()),
        }
    });
    let mut scored = Vec::new();
    let mut failures = Vec::new();
    for ((id, _, _), result) in items.into_iter().zip(results) {
        match result {
            Ok(score) => scored.push(ScoredItem {
                statement_id: id,
                score,
            }),
            Err(reason) => failures.push(FailedItem {
                statement_id: id,
                reason,
            }),
        }
    }
    let values: Vec<f64> = scored.iter().map(|item| item.score.score).collect();
    ProcessReport {
        aggregate: aggregate_process(&values).ok(),
        scored,
        failures,
    }
}

/// Pass/total counts for one breakdown bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassCount {
    pub passed: usize,
    pub total: usize,
}

/// Per-benchmark slice of the final report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub benchmark: String,
    pub cases: usize,
    pub outcome_score: f64,
    pub random_accuracy: f64,
    /// Criterion name -> number of cases failing it.
    pub criterion_failures: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub process_score: Option<f64>,
    /// Present when cases carry a `difficulty` label in `extra`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub difficulty_breakdown: BTreeMap<String, PassCount>,
    /// Present when cases carry a `topics` label in `extra`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub topic_breakdown: BTreeMap<String, PassCount>,
}

/// The full evaluation report across benchmarks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub benchmarks: Vec<BenchmarkReport>,
    pub overall_outcome: f64,
    pub overall_random_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overall_process: Option<f64>,
}

fn case_topics(case: &BenchmarkCase) -> Vec<String> {
    let mut topics = Vec::new();
    match case.extra.get("topics") {
        Some(Value::String(s)) => topics.push(s.clone()),
        Some(Value::Array(items)) => {
            for item in items {
                if let Value::String(s) = item {
                    topics.push(s.clone());
                }
            }
        }
        _ => {}
    }
    // Bucket by the chain's top-level segment.
    topics
        .iter()
        .map(|chain| chain.split(" -> ").next().unwrap_or(chain).trim().to_owned())
        .filter(|topic| !topic.is_empty())
        .collect()
}

/// Builds the combined report: per-benchmark outcome and process scores, the
/// random-guessing baseline, a per-criterion failure histogram, and
/// difficulty/topic breakdowns for cases that carry those labels.
pub fn emit_report(
    cases: &[BenchmarkCase],
    solutions: &BTreeMap<String, String>,
    process: Option<&ProcessReport>,
) -> Result<EvaluationReport, EvalError> {
    if cases.is_empty() {
        return Err(EvalError::EmptyBenchmark);
    }
    // Stable grouping by benchmark name, preserving first-seen order.
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&BenchmarkCase>> = BTreeMap::new();
    for case in cases {
        let name = case.benchmark.as_str();
        if !groups.contains_key(name) {
            order.push(name);
        }
        groups.entry(name).or_default().push(case);
    }
    // Map statement ids back to their benchmark for process aggregation.
    let mut statement_benchmark: BTreeMap<&str, &str> = BTreeMap::new();
    for case in cases {
        statement_benchmark.insert(&case.id, &case.benchmark);
        for variant in &case.variants {
            statement_benchmark.insert(&variant.id, &case.benchmark);
        }
    }
    let mut benchmarks = Vec::new();
    for name in order {
        let group = &groups[name];
        let mut passed = 0usize;
        let mut criterion_failures: BTreeMap<String, usize> = BTreeMap::new();
        let mut difficulty_breakdown: BTreeMap<String, PassCount> = BTreeMap::new();
        let mut topic_breakdown: BTreeMap<String, PassCount> = BTreeMap::new();
        for case in group {
            let judgment = judge_case(case, solutions);
            if judgment.passed {
                passed += 1;
            }
            for criterion in judgment.criteria.failed_names() {
                *criterion_failures.entry(criterion.to_owned()).or_insert(0) += 1;
            }
            if let Some(difficulty) = case.extra.get("difficulty").and_then(Value::as_f64) {
                let bucket = difficulty_breakdown
                    .entry(format!("{difficulty:.1}"))
                    .or_insert(PassCount { passed: 0, total: 0 });
                bucket.total += 1;
                if judgment.passed {
                    bucket.passed += 1;
                }
            }
            for topic in case_topics(case) {
                let bucket = topic_breakdown
                    .entry(topic)
                    .or_insert(PassCount { passed: 0, total: 0 });
                bucket.total += 1;
                if judgment.passed {
                    bucket.passed += 1;
                }
            }
        }
        let group_cases: Vec<BenchmarkCase> = group.iter().map(|c| (*c).clone()).collect();
        let process_score = process.and_then(|report| {
            let values: Vec<f64> = report
                .scored
                .iter()
                .filter(|item| {
                    statement_benchmark.get(item.statement_id.as_str()) == Some(&name)
                })
                .map(|item| item.score.score)
                .collect();
            aggregate_process(&values).ok()
        });
        benchmarks.push(BenchmarkReport {
            benchmark: name.to_owned(),
            cases: group.len(),
            outcome_score: 100.0 * passed as f64 / group.len() as f64,
            random_accuracy: random_accuracy(&group_cases)?,
            criterion_failures,
            process_score,
            difficulty_breakdown,
            topic_breakdown,
        });
    }
    Ok(EvaluationReport {
        overall_outcome: outcome_score(cases, solutions)?,
        overall_random_accuracy: random_accuracy(cases)?,
        overall_process: process.and_then(|report| report.aggregate),
        benchmarks,
    })
}

impl EvaluationReport {
    /// Plain-text table for terminals and logs.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<20} {:>6} {:>9} {:>8} {:>9}\n",
            "benchmark", "cases", "outcome", "random", "process"
        ));
        let process_cell = |score: Option<f64>| match score {
            Some(value) => format!("{value:>9.2}"),
            None => format!("{:>9}", "-"),
        };
        for report in &self.benchmarks {
            let label = if report.benchmark.is_empty() {
                "(unnamed)"
            } else {
                &report.benchmark
            };
            out.push_str(&format!(
                "{:<20} {:>6} {:>9.2} {:>8.2} {}\n",
                label,
                report.cases,
                report.outcome_score,
                report.random_accuracy,
                process_cell(report.process_score),
            ));
        }
        out.push_str(&format!(
            "{:<20} {:>6} {:>9.2} {:>8.2} {}\n",
            "overall",
            self.benchmarks.iter().map(|b| b.cases).sum::<usize>(),
            self.overall_outcome,
            self.overall_random_accuracy,
            process_cell(self.overall_process),
        ));
        for report in &self.benchmarks {
            if !report.criterion_failures.is_empty() {
                let label = if report.benchmark.is_empty() {
                    "(unnamed)"
                } else {
                    &report.benchmark
                };
                out.push_str(&format!("\ncriterion failures for {label}:\n"));
                for (criterion, count) in &report.criterion_failures {
                    out.push_str(&format!("  {criterion:<22} {count}\n"));
                }
            }
            for (title, breakdown) in [
                ("difficulty", &report.difficulty_breakdown),
                ("topic", &report.topic_breakdown),
            ] {
                if !breakdown.is_empty() {
                    out.push_str(&format!("\n{title} breakdown:\n"));
                    for (bucket, count) in breakdown {
                        out.push_str(&format!(
                            "  {bucket:<22} {}/{} passed\n",
                            count.passed, count.total
                        ));
                    }
                }
            }
        }
        out
    }
}
