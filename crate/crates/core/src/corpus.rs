//! Record types for the dataset pipeline and line-delimited JSON I/O.
//!
//! Every artifact the pipeline reads or writes is a UTF-8 file with one JSON
//! object per line. Readers reject malformed lines and duplicate ids with the
//! offending line numbers; unknown fields are preserved verbatim so files
//! produced by newer tools survive a round trip through older ones.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Half-step used by the difficulty grid.
pub const DIFFICULTY_MIN: f64 = 1.0;
/// Upper end of the difficulty grid.
pub const DIFFICULTY_MAX: f64 = 10.0;
/// Tolerance when snapping a reported rating onto the 0.5 grid.
pub const DIFFICULTY_SNAP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: invalid record `{id}`: {}", violations.join("; "))]
    InvalidRecord {
        path: String,
        line: usize,
        id: String,
        violations: Vec<String>,
    },
    #[error("{path}: duplicate id `{id}` on lines {first} and {second}")]
    DuplicateId {
        path: String,
        id: String,
        first: usize,
        second: usize,
    },
    #[error("record {index} (`{id}`) cannot be written: {}", violations.join("; "))]
    InvalidAtWrite {
        index: usize,
        id: String,
        violations: Vec<String>,
    },
    #[error("records {first} and {second} share id `{id}`")]
    DuplicateAtWrite {
        id: String,
        first: usize,
        second: usize,
    },
}

/// A dataset record that knows how to identify and validate itself.
pub trait Record: Serialize + DeserializeOwned {
    /// Human-readable record kind used in messages.
    const KIND: &'static str;
    fn id(&self) -> &str;
    /// Returns the list of invariant violations; empty means valid.
    fn validate(&self) -> Vec<String>;
}

/// An uncurated sample scraped from a raw corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub id: String,
    pub problem: String,
    #[serde(default)]
    pub solution: String,
    #[serde(default)]
    pub source: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Record for RawSample {
    const KIND: &'static str = "raw sample";

    fn id(&self) -> &str {
        &self.id
    }

    fn validate(&self) -> Vec<String> {
        let mut violations = Vec::new();
        if self.id.is_empty() {
            violations.push("id is empty".to_owned());
        }
        if self.problem.is_empty() {
            violations.push("problem is empty".to_owned());
        }
        violations
    }
}

/// One entry in the per-record trace of curation stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLogEntry {
    pub stage: String,
    pub passed: bool,
    #[serde(default)]
    pub detail: String,
}

/// A curated theorem with its annotations and provenance trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremRecord {
    pub id: String,
    pub theorem: String,
    #[serde(default)]
    pub rationale: String,
    #[serde(default)]
    pub proof: String,
    pub truth_label: bool,
    pub difficulty: f64,
    #[serde(default)]
    pub topics: Vec<String>,
    #[serde(default)]
    pub source: String,
    #[serde(default)]
    pub stage_log: Vec<StageLogEntry>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Record for TheoremRecord {
    const KIND: &'static str = "theorem record";

    fn id(&self) -> &str {
        &self.id
    }

    fn validate(&self) -> Vec<String> {
        let mut violations = Vec::new();
        if self.id.is_empty() {
            violations.push("id is empty".to_owned());
        }
        if self.theorem.is_empty() {
            violations.push("theorem is empty".to_owned());
        }
        if snap_to_difficulty_grid(self.difficulty).is_none() {
            violations.push(format!(
                "difficulty {} is not on the 0.5 grid in [{}, {}]",
                self.difficulty, DIFFICULTY_MIN, DIFFICULTY_MAX
            ));
        }
        if self.topics.len() > 3 {
            violations.push(format!("{} topic chains (max 3)", self.topics.len()));
        }
        for topic in &self.topics {
            if let Err(reason) = validate_topic_chain(topic) {
                violations.push(format!("topic chain `{topic}`: {reason}"));
            }
        }
        let proof_stage_passed = self
            .stage_log
            .iter()
            .any(|entry| entry.stage == "proof_generation" && entry.passed);
        if proof_stage_passed && self.proof.is_empty() {
            violations.push("proof is empty although proof_generation passed".to_owned());
        }
        violations
    }
}

/// How a variant statement relates to its parent theorem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relationship {
    Entails,
    Contradicts,
}

/// The truth label a variant must carry given its parent's label.
///
/// An entailed statement shares the parent's label; a contradictory statement
/// carries its negation.
pub fn derived_label(parent_label: bool, relationship: Relationship) -> bool {
    match relationship {
        Relationship::Entails => parent_label,
        Relationship::Contradicts => !parent_label,
    }
}

/// A statement derived from a parent theorem by entailment or negation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRecord {
    pub id: String,
    pub parent_id: String,
    pub statement: String,
    pub relationship: Relationship,
    pub truth_label: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proof: Option<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Record for VariantRecord {
    const KIND: &'static str = "variant record";

    fn id(&self) -> &str {
        &self.id
    }

    fn validate(&self) -> Vec<String> {
        let mut violations = Vec::new();
        if self.id.is_empty() {
            violations.push("id is empty".to_owned());
        }
        if self.parent_id.is_empty() {
            violations.push("parent_id is empty".to_owned());
        }
        if self.statement.is_empty() {
            violations.push("statement is empty".to_owned());
        }
        if !self.id.is_empty() && !self.parent_id.is_empty() {
            let expected_prefix = format!("{}/v", self.parent_id);
            let ordinal_ok = self
                .id
                .strip_prefix(&expected_prefix)
                .is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()));
            if !ordinal_ok {
                violations.push(format!(
                    "id `{}` is not `{}<k>` for a numeric k",
                    self.id, expected_prefix
                ));
            }
        }
        violations
    }
}

/// The root statement of a benchmark case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginalStatement {
    pub statement: String,
    pub truth_label: bool,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// An evaluation unit: an original statement plus its labeled variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCase {
    pub id: String,
    pub original: OriginalStatement,
    #[serde(default)]
    pub variants: Vec<VariantRecord>,
    #[serde(default)]
    pub benchmark: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Record for BenchmarkCase {
    const KIND: &'static str = "benchmark case";

    fn id(&self) -> &str {
        &self.id
    }

    fn validate(&self) -> Vec<String> {
        validate_case(self)
    }
}

/// Checks a benchmark case against the structural invariants. Returns the
/// list of violations; an empty list means the case is consistent.
pub fn validate_case(case: &BenchmarkCase) -> Vec<String> {
    let mut violations = Vec::new();
    if case.id.is_empty() {
        violations.push("id is empty".to_owned());
    }
    if case.original.statement.is_empty() {
        violations.push("original statement is empty".to_owned());
    }
    let mut seen = HashMap::new();
    for (index, variant) in case.variants.iter().enumerate() {
        for violation in variant.validate() {
            violations.push(format!("variant {index} (`{}`): {violation}", variant.id));
        }
        if variant.parent_id != case.id {
            violations.push(format!(
                "variant {index} (`{}`) has parent_id `{}`, expected `{}`",
                variant.id, variant.parent_id, case.id
            ));
        }
        let expected = derived_label(case.original.truth_label, variant.relationship);
        if variant.truth_label != expected {
            violations.push(format!(
                "variant {index} (`{}`) has truth_label {}, but {:?} of a {} original requires {}",
                variant.id, variant.truth_label, variant.relationship,
                case.original.truth_label, expected
            ));
        }
        if let Some(prior) = seen.insert(variant.id.clone(), index) {
            violations.push(format!(
                "variants {prior} and {index} share id `{}`",
                variant.id
            ));
        }
    }
    violations
}

/// Validates a single " -> "-separated topic chain of two or three segments.
pub fn validate_topic_chain(chain: &str) -> Result<(), String> {
    let segments: Vec<&str> = chain.split(" -> ").collect();
    if segments.len() < 2 {
        return Err("fewer than two segments".to_owned());
    }
    if segments.len() > 3 {
        return Err(format!("{} segments (max 3)", segments.len()));
    }
    for (index, segment) in segments.iter().enumerate() {
        let segment = segment.trim();
        if segment.is_empty() {
            return Err(format!("segment {index} is empty"));
        }
        if segment == "Other" && index + 1 != segments.len() {
            return Err("`Other` is only allowed as the last segment".to_owned());
        }
    }
    Ok(())
}

/// Snaps a raw rating onto the closed 0.5 grid between [`DIFFICULTY_MIN`] and
/// [`DIFFICULTY_MAX`]. Values farther than [`DIFFICULTY_SNAP_TOLERANCE`] from
/// a grid point, or outside the range, yield `None`.
pub fn snap_to_difficulty_grid(raw: f64) -> Option<f64> {
    if !raw.is_finite() {
        return None;
    }
    let snapped = (raw * 2.0).round() / 2.0;
    if (raw - snapped).abs() > DIFFICULTY_SNAP_TOLERANCE {
        return None;
    }
    if !(DIFFICULTY_MIN..=DIFFICULTY_MAX).contains(&snapped) {
        return None;
    }
    Some(snapped)
}

/// Reads a line-delimited JSON file of records, validating each one and
/// rejecting duplicate ids. Whitespace-only lines are ignored.
pub fn read_records<R: Record>(path: impl AsRef<Path>) -> Result<Vec<R>, CorpusError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: display.clone(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: display.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: R = serde_json::from_str(&line).map_err(|err| CorpusError::Malformed {
            path: display.clone(),
            line: line_no,
            message: format!("{} ({})", err, R::KIND),
        })?;
        let violations = record.validate();
        if !violations.is_empty() {
            return Err(CorpusError::InvalidRecord {
                path: display.clone(),
                line: line_no,
                id: record.id().to_owned(),
                violations,
            });
        }
        if let Some(first) = seen.insert(record.id().to_owned(), line_no) {
            return Err(CorpusError::DuplicateId {
                path: display,
                id: record.id().to_owned(),
                first,
                second: line_no,
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Validates and writes records as line-delimited JSON. Nothing is written if
/// any record is invalid or ids collide.
pub fn write_records<R: Record>(
    path: impl AsRef<Path>,
    records: &[R],
) -> Result<(), CorpusError> {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (index, record) in records.iter().enumerate() {
        let violations = record.validate();
        if !violations.is_empty() {
            return Err(CorpusError::InvalidAtWrite {
                index,
                id: record.id().to_owned(),
                violations,
            });
        }
        if let Some(first) = seen.insert(record.id(), index) {
            return Err(CorpusError::DuplicateAtWrite {
                id: record.id().to_owned(),
                first,
                second: index,
            });
        }
    }
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = File::create(path).map_err(|source| CorpusError::Io {
        path: display.clone(),
        source,
    })?;
    let mut writer = BufWriter::new(file);
    for record in records {
        let json = serde_json::to_string(record).map_err(|err| CorpusError::Malformed {
            path: display.clone(),
            line: 0,
            message: err.to_string(),
        })?;
        writer
            .write_all(json.as_bytes())
            .and_then(|()| writer.write_all(b"\n"))
            .map_err(|source| CorpusError::Io {
                path: display.clone(),
                source,
            })?;
    }
    writer.flush().map_err(|source| CorpusError::Io {
        path: display,
        source,
    })
}

/// Reads a line-delimited JSON file of arbitrary payloads (no id bookkeeping).
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, CorpusError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: display.clone(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut rows = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: display.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|err| CorpusError::Malformed {
            path: display.clone(),
            line: index + 1,
            message: err.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}
