//! Summary statistics over curated theorem records: difficulty density on the
//! 0.5 grid, topic distribution by top-level domain, and truth-label balance.

use crate::corpus::{TheoremRecord, DIFFICULTY_MAX, DIFFICULTY_MIN};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// One half-open difficulty bin `[lo, hi)`; the final bin includes 10.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// count / total records; 0 when the corpus is empty.
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub provable: usize,
    pub disprovable: usize,
    pub difficulty_bins: Vec<DifficultyBin>,
    /// Chain count per top-level domain (first segment of every chain).
    pub topic_counts: BTreeMap<String, usize>,
    pub mean_difficulty: f64,
}

/// Number of 0.5-wide bins spanning [1, 10].
pub const BIN_COUNT: usize = 18;

fn bin_index(difficulty: f64) -> Option<usize> {
    if !(DIFFICULTY_MIN..=DIFFICULTY_MAX).contains(&difficulty) {
        return None;
    }
    let index = ((difficulty - DIFFICULTY_MIN) * 2.0).floor() as usize;
    Some(index.min(BIN_COUNT - 1))
}

/// Builds the summary. Records with out-of-range difficulties are counted in
/// the totals but fall outside every bin; validated corpora never have any.
pub fn summarize(records: &[TheoremRecord]) -> CorpusStats {
    let mut counts = [0usize; BIN_COUNT];
    let mut topic_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut provable = 0usize;
    let mut difficulty_sum = 0.0;
    for record in records {
        if let Some(index) = bin_index(record.difficulty) {
            counts[index] += 1;
        }
        difficulty_sum += record.difficulty;
        if record.truth_label {
            provable += 1;
        }
        for chain in &record.topics {
            let top = chain.split(" -> ").next().unwrap_or(chain).trim();
            if !top.is_empty() {
                *topic_counts.entry(top.to_owned()).or_insert(0) += 1;
            }
        }
    }
    let total = records.len();
    let difficulty_bins = counts
        .iter()
        .enumerate()
        .map(|(index, &count)| {
            let lo = DIFFICULTY_MIN + index as f64 * 0.5;
            DifficultyBin {
                lo,
                hi: lo + 0.5,
                count,
                density: if total == 0 {
                    0.0
                } else {
                    count as f64 / total as f64
                },
            }
        })
        .collect();
    CorpusStats {
        total,
        provable,
        disprovable: total - provable,
        difficulty_bins,
        topic_counts,
        mean_difficulty: if total == 0 {
            0.0
        } else {
            difficulty_sum / total as f64
        },
    }
}

impl CorpusStats {
    /// Plain-text rendering with an ASCII density histogram.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "records: {} ({} provable, {} disprovable)",
            self.total, self.provable, self.disprovable
        );
        let _ = writeln!(out, "mean difficulty: {:.2}", self.mean_difficulty);
        let _ = writeln!(out, "difficulty density (bin width 0.5):");
        let peak = self
            .difficulty_bins
            .iter()
            .map(|bin| bin.count)
            .max()
            .unwrap_or(0)
            .max(1);
        for bin in &self.difficulty_bins {
            let bar_len = bin.count * 40 / peak;
            let _ = writeln!(
                out,
                "  [{:>4.1}, {:>4.1}{} {:>6} {:>7.4} {}",
                bin.lo,
                bin.hi,
                if (bin.hi - DIFFICULTY_MAX).abs() < f64::EPSILON {
                    "]"
                } else {
                    ")"
                },
                bin.count,
                bin.density,
                "#".repeat(bar_len),
            );
        }
        if !self.topic_counts.is_empty() {
            let _ = writeln!(out, "topics (by top-level domain):");
            let mut pairs: Vec<(&String, &usize)> = self.topic_counts.iter().collect();
            pairs.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
            for (topic, count) in pairs {
                let _ = writeln!(out, "  {count:>6}  {topic}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Map;

    fn record(difficulty: f64, truth: bool, topics: &[&str]) -> TheoremRecord {
        TheoremRecord {
            id: format!("t-{difficulty}-{truth}-{}", topics.len()),
            theorem: "statement".to_owned(),
            rationale: String::new(),
            proof: String::new(),
            truth_label: truth,
            difficulty,
            topics: topics.iter().map(|t| (*t).to_owned()).collect(),
            source: String::new(),
            stage_log: Vec::new(),
            extra: Map::new(),
        }
    }

    #[test]
    fn bins_are_half_open_with_closed_top() {
        assert_eq!(bin_index(1.0), Some(0));
        assert_eq!(bin_index(1.5), Some(1));
        assert_eq!(bin_index(5.0), Some(8));
        assert_eq!(bin_index(9.5), Some(17));
        assert_eq!(bin_index(10.0), Some(17));
        assert_eq!(bin_index(0.5), None);
        assert_eq!(bin_index(10.5), None);
    }

    #[test]
    fn densities_sum_to_one_over_on_grid_records() {
        let records: Vec<TheoremRecord> = (0..18)
            .map(|i| record(1.0 + i as f64 * 0.5, i % 2 == 0, &[]))
            .collect();
        let stats = summarize(&records);
        assert_eq!(stats.total, 18);
        assert_eq!(stats.provable, 9);
        assert_eq!(stats.disprovable, 9);
        let density_sum: f64 = stats.difficulty_bins.iter().map(|b| b.density).sum();
        assert!((density_sum - 1.0).abs() < 1e-12);
        assert!(stats.difficulty_bins.iter().all(|b| b.count == 1));
    }

    #[test]
    fn topics_group_by_first_segment_across_all_chains() {
        let records = vec![
            record(
                5.0,
                true,
                &[
                    "Algebra -> Intermediate Algebra -> Inequalities",
                    "Discrete Mathematics -> Combinatorics",
                ],
            ),
            record(6.0, true, &["Algebra -> Linear Algebra"]),
            record(7.0, false, &["Number Theory -> Congruences -> Other"]),
        ];
        let stats = summarize(&records);
        assert_eq!(stats.topic_counts["Algebra"], 2);
        assert_eq!(stats.topic_counts["Discrete Mathematics"], 1);
        assert_eq!(stats.topic_counts["Number Theory"], 1);
    }

    #[test]
    fn empty_corpus_is_all_zero() {
        let stats = summarize(&[]);
        assert_eq!(stats.total, 0);
        assert_eq!(stats.mean_difficulty, 0.0);
        assert!(stats.difficulty_bins.iter().all(|b| b.density == 0.0));
        assert_eq!(stats.difficulty_bins.len(), BIN_COUNT);
    }

    #[test]
    fn text_rendering_mentions_key_figures() {
        let stats = summarize(&[record(5.5, true, &["Algebra -> Polynomials"])]);
        let text = stats.render_text();
        assert!(text.contains("records: 1 (1 provable, 0 disprovable)"), "{text}");
        assert!(text.contains("[ 5.5,  6.0)"), "{text}");
        assert!(text.contains("Algebra"), "{text}");
        assert!(text.contains("[ 9.5, 10.0]"), "{text}");
    }
}
