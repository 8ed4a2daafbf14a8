//! Recall-and-justify decontamination: embed every training problem and
//! benchmark statement, recall the most similar benchmark items above a
//! cosine threshold, and confirm each candidate with an LLM judge. A sample
//! is removed exactly when at least one recalled hit is judged contaminated.

use crate::corpus::RawSample;
use crate::prompts;
use crate::providers::{
    parallel_map, ChatProvider, ChatRequest, EmbeddingProvider, EmbeddingVector, ProviderError,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum DecontamError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("benchmark statement list is empty")]
    EmptyBenchmark,
    #[error("embedding dimensions disagree: corpus {corpus} vs benchmark {benchmark}")]
    DimensionMismatch { corpus: usize, benchmark: usize },
    #[error("sample `{id}`: {source}")]
    Provider {
        id: String,
        #[source]
        source: ProviderError,
    },
    #[error(transparent)]
    Embedding(#[from] ProviderError),
}

/// A benchmark item recalled as a potential duplicate of a training sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallHit {
    pub train_id: String,
    pub test_id: String,
    pub similarity: f64,
}

/// A recall hit together with the judge's decision on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExaminedHit {
    #[serde(flatten)]
    pub hit: RecallHit,
    pub judged_contaminated: bool,
    /// Set when the judge's reply was neither True nor False; the decision
    /// then follows the configured error policy.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub judgment_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecontamReport {
    pub kept_ids: Vec<String>,
    pub removed_ids: Vec<String>,
    pub hits_examined: Vec<ExaminedHit>,
    pub threshold: f64,
    pub top_k: usize,
}

#[derive(Debug, Clone)]
pub struct DecontamOptions {
    /// Similarity must strictly exceed this to count as a hit.
    pub threshold: f64,
    /// At most this many hits per training sample.
    pub top_k: usize,
    /// Keep samples whose judge reply was unparseable instead of removing
    /// them. Off by default: ambiguity counts as contamination.
    pub retain_on_judgment_error: bool,
    /// Worker threads for the judge fan-out.
    pub workers: usize,
}

impl Default for DecontamOptions {
    fn default() -> Self {
        DecontamOptions {
            threshold: 0.7,
            top_k: 5,
            retain_on_judgment_error: false,
            workers: 8,
        }
    }
}

/// Cosine similarity of two embeddings, clamped into [-1, 1].
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, DecontamError> {
    if u.dim() != v.dim() {
        return Err(DecontamError::DimensionMismatch {
            corpus: u.dim(),
            benchmark: v.dim(),
        });
    }
    let dot: f64 = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| a * b)
        .sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// Recalls the benchmark items most similar to one training sample: at most
/// `top_k` hits with similarity strictly above `threshold`, sorted by
/// similarity descending with ties broken by test_id ascending.
pub fn recall(
    train_id: &str,
    train_vec: &EmbeddingVector,
    tests: &[(String, EmbeddingVector)],
    threshold: f64,
    top_k: usize,
) -> Result<Vec<RecallHit>, DecontamError> {
    let mut hits = Vec::new();
    for (test_id, test_vec) in tests {
        let similarity = cosine(train_vec, test_vec)?;
        if similarity > threshold {
            hits.push(RecallHit {
                train_id: train_id.to_owned(),
                test_id: test_id.clone(),
                similarity,
            });
        }
    }
    hits.sort_by(|a, b| {
        b.similarity
            .partial_cmp(&a.similarity)
            .expect("similarities are finite")
            .then_with(|| a.test_id.cmp(&b.test_id))
    });
    hits.truncate(top_k);
    Ok(hits)
}

/// What the judge said about one candidate pair.
#[derive(Debug, Clone, PartialEq)]
pub enum Judgment {
    Contaminated,
    Clean,
    /// Reply was neither True nor False; carries the raw reply.
    Unparseable(String),
}

/// Asks the judge whether a training statement duplicates a benchmark one.
/// The reply, trimmed and lowercased, must begin with "true" or "false".
pub fn judge_contamination(
    judge: &dyn ChatProvider,
    model: &str,
    train_statement: &str,
    test_statement: &str,
) -> Result<Judgment, ProviderError> {
    let prompt = prompts::contamination(train_statement, test_statement);
    let response = judge.chat(&ChatRequest::new(model, prompt))?;
    let normalized = response.text.trim().to_lowercase();
    Ok(if normalized.starts_with("true") {
        Judgment::Contaminated
    } else if normalized.starts_with("false") {
        Judgment::Clean
    } else {
        Judgment::Unparseable(response.text)
    })
}

/// Runs the full pipeline over a corpus. Every sample's problem text and
/// every benchmark statement is embedded; each sample's recalled hits are all
/// judged (one call per hit); a sample is removed iff at least one hit is
/// judged contaminated. Provider failures abort the run with the sample id.
pub fn decontaminate(
    corpus: &[RawSample],
    benchmark_statements: &[(String, String)],
    embedder: &dyn EmbeddingProvider,
    judge: &dyn ChatProvider,
    judge_model: &str,
    options: &DecontamOptions,
) -> Result<DecontamReport, DecontamError> {
    if corpus.is_empty() {
        return Err(DecontamError::EmptyCorpus);
    }
    if benchmark_statements.is_empty() {
        return Err(DecontamError::EmptyBenchmark);
    }

    let bench_texts: Vec<String> = benchmark_statements
        .iter()
        .map(|(_, text)| text.clone())
        .collect();
    let bench_vecs = embedder.embed(&bench_texts)?;
    let corpus_texts: Vec<String> = corpus.iter().map(|s| s.problem.clone()).collect();
    let corpus_vecs = embedder.embed(&corpus_texts)?;
    if bench_vecs[0].dim() != corpus_vecs[0].dim() {
        return Err(DecontamError::DimensionMismatch {
            corpus: corpus_vecs[0].dim(),
            benchmark: bench_vecs[0].dim(),
        });
    }
    let tests: Vec<(String, EmbeddingVector)> = benchmark_statements
        .iter()
        .map(|(id, _)| id.clone())
        .zip(bench_vecs)
        .collect();

    struct SampleVerdict {
        removed: bool,
        examined: Vec<ExaminedHit>,
    }

    let indices: Vec<usize> = (0..corpus.len()).collect();
    let judge_sample = |&index: &usize| -> Result<SampleVerdict, DecontamError> {
        let sample = &corpus[index];
        let hits = recall(
            &sample.id,
            &corpus_vecs[index],
            &tests,
            options.threshold,
            options.top_k,
        )?;
        let mut removed = false;
        let mut examined = Vec::with_capacity(hits.len());
        for hit in hits {
            let test_statement = &benchmark_statements
                .iter()
                .find(|(id, _)| *id == hit.test_id)
                .expect("hit refers to a benchmark id")
                .1;
            let judgment = judge_contamination(judge, judge_model, &sample.problem, test_statement)
                .map_err(|source| DecontamError::Provider {
                    id: sample.id.clone(),
                    source,
                })?;
            let (judged_contaminated, judgment_error) = match judgment {
                Judgment::Contaminated => (true, None),
                Judgment::Clean => (false, None),
                Judgment::Unparseable(reply) => {
                    (!options.retain_on_judgment_error, Some(reply))
                }
            };
            removed = removed || judged_contaminated;
            examined.push(ExaminedHit {
                hit,
                judged_contaminated,
                judgment_error,
            });
        }
        Ok(SampleVerdict { removed, examined })
    };
    let verdicts = parallel_map(&indices, options.workers, judge_sample);

    let mut kept_ids = Vec::new();
    let mut removed_ids = Vec::new();
    let mut hits_examined = Vec::new();
    for (sample, verdict) in corpus.iter().zip(verdicts) {
        let verdict: SampleVerdict = verdict?;
        if verdict.removed {
            removed_ids.push(sample.id.clone());
        } else {
            kept_ids.push(sample.id.clone());
        }
        hits_examined.extend(verdict.examined);
    }
    Ok(DecontamReport {
        kept_ids,
        removed_ids,
        hits_examined,
        threshold: options.threshold,
        top_k: options.top_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::mock::{MockChatProvider, MockEmbedder, MockRule};
    use proptest::prelude::*;
    use serde_json::Map;

    fn vec2(x: f64, y: f64) -> EmbeddingVector {
        EmbeddingVector::from_raw(vec![x, y]).unwrap()
    }

    fn sample(id: &str, problem: &str) -> RawSample {
        RawSample {
            id: id.to_owned(),
            problem: problem.to_owned(),
            solution: String::new(),
            source: String::new(),
            extra: Map::new(),
        }
    }

    #[test]
    fn cosine_matches_hand_values() {
        let e1 = vec2(1.0, 0.0);
        let e2 = vec2(0.0, 1.0);
        assert!((cosine(&e1, &e1).unwrap() - 1.0).abs() < 1e-9);
        assert!(cosine(&e1, &e2).unwrap().abs() < 1e-12);
        let u = vec2(0.6, 0.8);
        let v = vec2(0.8, 0.6);
        assert!((cosine(&u, &v).unwrap() - 0.96).abs() < 1e-12);
        assert!((cosine(&u, &v).unwrap() - cosine(&v, &u).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn cosine_rejects_dimension_mismatch() {
        let u = vec2(1.0, 0.0);
        let v = EmbeddingVector::from_raw(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            cosine(&u, &v),
            Err(DecontamError::DimensionMismatch { .. })
        ));
    }

    fn tests_with_sims(sims: &[(&str, f64)]) -> (EmbeddingVector, Vec<(String, EmbeddingVector)>) {
        // Train vector is e1; a test with target similarity s gets
        // (s, sqrt(1 - s^2)) so the dot product is exactly s.
        let train = vec2(1.0, 0.0);
        let tests = sims
            .iter()
            .map(|(id, s)| ((*id).to_owned(), vec2(*s, (1.0 - s * s).sqrt())))
            .collect();
        (train, tests)
    }

    #[test]
    fn recall_keeps_the_top_k_above_threshold() {
        let (train, tests) = tests_with_sims(&[
            ("t1", 0.71),
            ("t2", 0.75),
            ("t3", 0.80),
            ("t4", 0.85),
            ("t5", 0.90),
            ("t6", 0.95),
            ("t7", 0.99),
        ]);
        let hits = recall("s", &train, &tests, 0.7, 5).unwrap();
        assert_eq!(hits.len(), 5);
        let ids: Vec<&str> = hits.iter().map(|h| h.test_id.as_str()).collect();
        assert_eq!(ids, vec!["t7", "t6", "t5", "t4", "t3"]);
        assert!(hits.windows(2).all(|w| w[0].similarity >= w[1].similarity));
    }

    #[test]
    fn recall_threshold_is_strict() {
        let (train, tests) = tests_with_sims(&[("t1", 0.7), ("t2", 0.70000001), ("t3", 0.5)]);
        let hits = recall("s", &train, &tests, 0.7, 5).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].test_id, "t2");
    }

    #[test]
    fn recall_breaks_ties_by_test_id() {
        let (train, tests) = tests_with_sims(&[("zeta", 0.9), ("alpha", 0.9), ("mid", 0.95)]);
        let hits = recall("s", &train, &tests, 0.7, 5).unwrap();
        let ids: Vec<&str> = hits.iter().map(|h| h.test_id.as_str()).collect();
        assert_eq!(ids, vec!["mid", "alpha", "zeta"]);
    }

    #[test]
    fn judge_reply_parsing() {
        let model = "judge";
        let yes = MockChatProvider::fixed("True");
        assert_eq!(
            judge_contamination(&yes, model, "a", "b").unwrap(),
            Judgment::Contaminated
        );
        let no = MockChatProvider::fixed(" false.\n");
        assert_eq!(
            judge_contamination(&no, model, "a", "b").unwrap(),
            Judgment::Clean
        );
        let shrug = MockChatProvider::fixed("It depends");
        assert!(matches!(
            judge_contamination(&shrug, model, "a", "b").unwrap(),
            Judgment::Unparseable(_)
        ));
    }

    #[test]
    fn judge_prompt_contains_both_statements() {
        let judge = MockChatProvider::from_handler(|request| {
            assert!(request.user_prompt.contains("the train statement"));
            assert!(request.user_prompt.contains("the test statement"));
            crate::providers::ChatResponse::stopped("False")
        });
        judge_contamination(&judge, "judge", "the train statement", "the test statement")
            .unwrap();
    }

    fn pinned_embedder(dim: usize, pins: &[(&str, Vec<f64>)]) -> MockEmbedder {
        let mut embedder = MockEmbedder::new(dim);
        for (text, raw) in pins {
            embedder = embedder.with_override(*text, raw.clone());
        }
        embedder
    }

    #[test]
    fn verbatim_copy_is_removed_and_clean_sample_kept() {
        let bench = vec![("bench#1".to_owned(), "every even number exceeds one".to_owned())];
        let corpus = vec![
            sample("train-1", "every even number exceeds one"),
            sample("train-2", "a totally unrelated polynomial identity"),
        ];
        let embedder = pinned_embedder(
            3,
            &[
                ("every even number exceeds one", vec![1.0, 0.0, 0.0]),
                ("a totally unrelated polynomial identity", vec![0.0, 1.0, 0.0]),
            ],
        );
        let judge = MockChatProvider::fixed("True");
        let report = decontaminate(
            &corpus,
            &bench,
            &embedder,
            &judge,
            "judge",
            &DecontamOptions::default(),
        )
        .unwrap();
        assert_eq!(report.removed_ids, vec!["train-1"]);
        assert_eq!(report.kept_ids, vec!["train-2"]);
        assert_eq!(report.hits_examined.len(), 1);
        assert!((report.hits_examined[0].hit.similarity - 1.0).abs() < 1e-9);
        assert_eq!(judge.calls(), 1, "exactly one hit, exactly one judge call");
    }

    #[test]
    fn zero_hits_means_zero_judge_calls() {
        let bench = vec![("bench#1".to_owned(), "statement one".to_owned())];
        let corpus = vec![sample("a", "problem a"), sample("b", "problem b")];
        let embedder = pinned_embedder(
            3,
            &[
                ("statement one", vec![1.0, 0.0, 0.0]),
                ("problem a", vec![0.0, 1.0, 0.0]),
                ("problem b", vec![0.0, 0.0, 1.0]),
            ],
        );
        let judge = MockChatProvider::fixed("True");
        let report = decontaminate(
            &corpus,
            &bench,
            &embedder,
            &judge,
            "judge",
            &DecontamOptions::default(),
        )
        .unwrap();
        assert_eq!(judge.calls(), 0);
        assert_eq!(report.kept_ids, vec!["a", "b"]);
        assert!(report.removed_ids.is_empty());
        assert!(report.hits_examined.is_empty());
    }

    #[test]
    fn judge_can_clear_a_recalled_paraphrase() {
        let bench = vec![("bench#1".to_owned(), "the target statement".to_owned())];
        let corpus = vec![sample("near", "a close but legitimate neighbor")];
        // similarity 0.8 > 0.7: recalled, then cleared by the judge.
        let embedder = pinned_embedder(
            2,
            &[
                ("the target statement", vec![1.0, 0.0]),
                ("a close but legitimate neighbor", vec![0.8, 0.6]),
            ],
        );
        let judge = MockChatProvider::fixed("False — different claims.");
        let report = decontaminate(
            &corpus,
            &bench,
            &embedder,
            &judge,
            "judge",
            &DecontamOptions::default(),
        )
        .unwrap();
        assert_eq!(report.kept_ids, vec!["near"]);
        assert_eq!(report.hits_examined.len(), 1);
        assert!(!report.hits_examined[0].judged_contaminated);
    }

    #[test]
    fn unparseable_judgment_follows_the_error_policy() {
        let bench = vec![("bench#1".to_owned(), "the target statement".to_owned())];
        let corpus = vec![sample("near", "suspiciously close paraphrase")];
        let embedder = pinned_embedder(
            2,
            &[
                ("the target statement", vec![1.0, 0.0]),
                ("suspiciously close paraphrase", vec![0.9, (1.0f64 - 0.81).sqrt()]),
            ],
        );
        let judge = MockChatProvider::fixed("I cannot decide.");

        let conservative = decontaminate(
            &corpus,
            &bench,
            &embedder,
            &judge,
            "judge",
            &DecontamOptions::default(),
        )
        .unwrap();
        assert_eq!(conservative.removed_ids, vec!["near"]);
        assert!(conservative.hits_examined[0].judgment_error.is_some());

        let lenient = decontaminate(
            &corpus,
            &bench,
            &embedder,
            &judge,
            "judge",
            &DecontamOptions {
                retain_on_judgment_error: true,
                ..DecontamOptions::default()
            },
        )
        .unwrap();
        assert_eq!(lenient.kept_ids, vec!["near"]);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let embedder = MockEmbedder::new(4);
        let judge = MockChatProvider::fixed("True");
        let bench = vec![("b".to_owned(), "s".to_owned())];
        assert!(matches!(
            decontaminate(&[], &bench, &embedder, &judge, "j", &DecontamOptions::default()),
            Err(DecontamError::EmptyCorpus)
        ));
        let corpus = vec![sample("a", "p")];
        assert!(matches!(
            decontaminate(&corpus, &[], &embedder, &judge, "j", &DecontamOptions::default()),
            Err(DecontamError::EmptyBenchmark)
        ));
    }

    #[test]
    fn provider_failures_carry_the_sample_id() {
        let bench = vec![("bench#1".to_owned(), "the statement".to_owned())];
        let corpus = vec![sample("failing-sample", "the statement")];
        let embedder = pinned_embedder(2, &[("the statement", vec![1.0, 0.0])]);
        // No rules, no default: any judge call errors out.
        let judge = MockChatProvider::from_rules(Vec::<MockRule>::new(), None);
        let err = decontaminate(
            &corpus,
            &bench,
            &embedder,
            &judge,
            "judge",
            &DecontamOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("failing-sample"), "{err}");
    }

    proptest! {
        /// Raising the threshold can only shrink the removed set.
        #[test]
        fn monotone_in_threshold(
            corpus_seed in proptest::collection::vec("[a-z]{3,12}", 1..12),
            bench_seed in proptest::collection::vec("[a-z]{3,12}", 1..4),
            lo in 0.0f64..0.5,
            delta in 0.0f64..0.5,
        ) {
            let corpus: Vec<RawSample> = corpus_seed
                .iter()
                .enumerate()
                .map(|(i, text)| sample(&format!("s{i}"), text))
                .collect();
            let bench: Vec<(String, String)> = bench_seed
                .iter()
                .enumerate()
                .map(|(i, text)| (format!("b{i}"), format!("bench {text}")))
                .collect();
            let embedder = MockEmbedder::new(4);
            let judge = MockChatProvider::fixed("True");
            let removed_at = |threshold: f64| {
                let options = DecontamOptions { threshold, ..DecontamOptions::default() };
                decontaminate(&corpus, &bench, &embedder, &judge, "j", &options)
                    .unwrap()
                    .removed_ids
            };
            let loose = removed_at(lo);
            let strict = removed_at(lo + delta);
            for id in &strict {
                prop_assert!(loose.contains(id), "{id} removed at {} but not {}", lo + delta, lo);
            }
            // Partition invariant at both thresholds.
            let report = decontaminate(
                &corpus, &bench, &embedder, &judge, "j",
                &DecontamOptions { threshold: lo, ..DecontamOptions::default() },
            ).unwrap();
            prop_assert_eq!(report.kept_ids.len() + report.removed_ids.len(), corpus.len());
        }
    }
}
