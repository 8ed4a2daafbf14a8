//! `proofpipe` — one binary driving the whole pipeline: decontamination,
//! curation, variant expansion, rollout scoring, and evaluation.
//!
//! Every subcommand reads and writes line-delimited JSON datasets, takes its
//! tunables from an optional TOML configuration (builtin defaults otherwise),
//! and drops a `.manifest.json` beside its primary output recording inputs,
//! the configuration hash, and headline counts. Exit codes: 0 on success, 1
//! with a one-line diagnostic on runtime failure, 2 on usage errors —
//! including a configuration file that cannot be loaded.

mod manifest;
mod wiring;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use manifest::RunManifest;
use proofpipe_core::config::{ConfigError, PipelineConfig};
use proofpipe_core::corpus::{self, BenchmarkCase, RawSample, Record, TheoremRecord};
use proofpipe_core::curation::{curate_corpus, CurationContext};
use proofpipe_core::decontam::{decontaminate, DecontamOptions};
use proofpipe_core::evaluation::{
    emit_report, evaluate_process, solution_map, ProcessContext, Solution,
};
use proofpipe_core::reward::{score_rollouts, Rollout, SanityLimits};
use proofpipe_core::stats;
use proofpipe_core::variants::{check_case_consistency, expand_dataset, VariantContext};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "proofpipe",
    version,
    about = "Dataset curation and evaluation pipeline for natural-language theorem proving"
)]
struct Cli {
    /// Pipeline configuration (TOML); builtin defaults when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Remove training samples that leak benchmark statements
    Decontaminate(DecontaminateArgs),
    /// Run the staged curation chain over raw samples
    Curate(CurateArgs),
    /// Generate contradictory variants of provable theorems
    Variants(VariantsArgs),
    /// Score rollouts with verifiable rewards and group advantages
    ScoreRollouts(ScoreRolloutsArgs),
    /// Score final verdicts against benchmark cases
    EvalOutcome(EvalArgs),
    /// Judge reasoning quality statement by statement
    EvalProcess(EvalArgs),
    /// Summarize a curated corpus
    Stats(StatsArgs),
    /// Check benchmark cases for schema and label violations
    Validate(ValidateArgs),
}

#[derive(Args)]
struct DecontaminateArgs {
    /// Raw corpus (JSONL of samples)
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    /// Directory of benchmark statement files (*.txt, one file per benchmark)
    #[arg(long, value_name = "DIR")]
    benchmarks: PathBuf,
    /// Cosine-similarity recall threshold; defaults to the configured value
    #[arg(long)]
    threshold: Option<f64>,
    /// Recalled benchmark items examined per sample; defaults to the config
    #[arg(long)]
    top_k: Option<usize>,
    /// Keep samples whose judge reply was unparseable instead of dropping them
    #[arg(long)]
    retain_on_judgment_error: bool,
    /// Cleaned corpus (JSONL)
    #[arg(long, value_name = "FILE")]
    out_clean: PathBuf,
    /// Recall-and-judgment report (JSON)
    #[arg(long, value_name = "FILE")]
    out_report: PathBuf,
}

#[derive(Args)]
struct CurateArgs {
    /// Raw corpus (JSONL of samples)
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Curated theorem records (JSONL)
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Rejected samples with their stage logs (JSONL)
    #[arg(long, value_name = "FILE")]
    rejects: PathBuf,
    /// Minimum difficulty kept; defaults to the configured value
    #[arg(long)]
    min_difficulty: Option<f64>,
}

#[derive(Args)]
struct VariantsArgs {
    /// Curated theorem records (JSONL)
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Generated variant records (JSONL)
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Parents whose generation failed, with reasons (JSONL)
    #[arg(long, value_name = "FILE")]
    quarantine: PathBuf,
}

#[derive(Args)]
struct ScoreRolloutsArgs {
    /// Rollouts to score (JSONL with statement_id and text)
    #[arg(long, value_name = "FILE")]
    rollouts: PathBuf,
    /// Truth labels joined by statement_id (JSONL)
    #[arg(long, value_name = "FILE")]
    truths: PathBuf,
    /// Scored rollouts with rewards and advantages (JSONL)
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Benchmark cases (JSONL)
    #[arg(long, value_name = "FILE")]
    cases: PathBuf,
    /// Model solutions keyed by statement_id (JSONL)
    #[arg(long, value_name = "FILE")]
    solutions: PathBuf,
    /// Evaluation report (JSON)
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    /// Curated theorem records (JSONL)
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Also write the summary as JSON
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Benchmark cases (JSONL)
    #[arg(long, value_name = "FILE")]
    cases: PathBuf,
    /// Also write the violation list as JSON
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load_config(cli.config.as_deref()) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(2);
        }
    };
    match run(cli.command, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, ConfigError> {
    match path {
        Some(path) => PipelineConfig::load(path),
        None => Ok(PipelineConfig::default()),
    }
}

fn run(command: Command, config: &PipelineConfig) -> anyhow::Result<()> {
    match command {
        Command::Decontaminate(args) => cmd_decontaminate(args, config),
        Command::Curate(args) => cmd_curate(args, config),
        Command::Variants(args) => cmd_variants(args, config),
        Command::ScoreRollouts(args) => cmd_score_rollouts(args, config),
        Command::EvalOutcome(args) => cmd_eval_outcome(args, config),
        Command::EvalProcess(args) => cmd_eval_process(args, config),
        Command::Stats(args) => cmd_stats(args, config),
        Command::Validate(args) => cmd_validate(args, config),
    }
}

fn cmd_decontaminate(args: DecontaminateArgs, config: &PipelineConfig) -> anyhow::Result<()> {
    let samples: Vec<RawSample> = corpus::read_records(&args.corpus)?;
    let benchmarks = read_benchmark_dir(&args.benchmarks)?;
    let embedder = wiring::embedding_provider(config)?;
    let judge = wiring::chat_provider(config)?;
    let judge_model = config.models.require_contamination_judge()?;
    let options = DecontamOptions {
        threshold: args.threshold.unwrap_or(config.thresholds.similarity),
        top_k: args.top_k.unwrap_or(config.thresholds.top_k),
        retain_on_judgment_error: args.retain_on_judgment_error,
        workers: config.provider.max_in_flight,
    };
    let report = decontaminate(
        &samples,
        &benchmarks,
        embedder.as_ref(),
        judge.as_ref(),
        &judge_model,
        &options,
    )?;
    let kept: HashSet<&str> = report.kept_ids.iter().map(String::as_str).collect();
    let clean: Vec<RawSample> = samples
        .iter()
        .filter(|sample| kept.contains(sample.id.as_str()))
        .cloned()
        .collect();
    corpus::write_records(&args.out_clean, &clean)?;
    write_json(&args.out_report, &report)?;
    RunManifest::new("decontaminate", config)
        .input(&args.corpus)
        .input(&args.benchmarks)
        .output(&args.out_clean)
        .output(&args.out_report)
        .count("corpus", samples.len())
        .count("benchmark_statements", benchmarks.len())
        .count("kept", report.kept_ids.len())
        .count("removed", report.removed_ids.len())
        .count("hits_examined", report.hits_examined.len())
        .write_beside(&args.out_clean)?;
    println!(
        "kept {} of {} samples; removed {} ({} recall hits examined)",
        report.kept_ids.len(),
        samples.len(),
        report.removed_ids.len(),
        report.hits_examined.len()
    );
    Ok(())
}

/// Reads every `*.txt` file in the directory as one benchmark: the file stem
/// names the benchmark and every non-blank line that is not a `#` comment is
/// one statement, with id `<stem>#<line>` (1-based file line numbers).
fn read_benchmark_dir(dir: &Path) -> anyhow::Result<Vec<(String, String)>> {
    let entries = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read benchmark directory {}", dir.display()))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry
            .with_context(|| format!("cannot read benchmark directory {}", dir.display()))?
            .path();
        if path.extension().is_some_and(|ext| ext == "txt") {
            files.push(path);
        }
    }
    files.sort();
    let mut statements = Vec::new();
    for file in &files {
        let stem = file
            .file_stem()
            .map(|stem| stem.to_string_lossy().into_owned())
            .unwrap_or_default();
        let body = std::fs::read_to_string(file)
            .with_context(|| format!("cannot read {}", file.display()))?;
        for (index, line) in body.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            statements.push((format!("{stem}#{}", index + 1), line.to_owned()));
        }
    }
    if statements.is_empty() {
        bail!("no benchmark statements found under {}", dir.display());
    }
    Ok(statements)
}

fn cmd_curate(args: CurateArgs, config: &PipelineConfig) -> anyhow::Result<()> {
    let samples: Vec<RawSample> = corpus::read_records(&args.input)?;
    let provider = wiring::chat_provider(config)?;
    let model = config.models.require_curation()?;
    let ctx = CurationContext {
        provider: provider.as_ref(),
        model: &model,
        temperature: config.sampling.temperature,
        max_output_tokens: Some(config.sampling.max_output_tokens),
        min_difficulty: args
            .min_difficulty
            .unwrap_or(config.thresholds.min_difficulty),
    };
    let report = curate_corpus(&ctx, &samples, config.provider.max_in_flight);
    corpus::write_records(&args.out, &report.records)?;
    corpus::write_records(&args.rejects, &report.rejects)?;
    RunManifest::new("curate", config)
        .input(&args.input)
        .output(&args.out)
        .output(&args.rejects)
        .count("input", samples.len())
        .count("curated", report.records.len())
        .count("rejected", report.rejects.len())
        .write_beside(&args.out)?;
    println!(
        "curated {} of {} samples ({} rejected)",
        report.records.len(),
        samples.len(),
        report.rejects.len()
    );
    Ok(())
}

fn cmd_variants(args: VariantsArgs, config: &PipelineConfig) -> anyhow::Result<()> {
    let records: Vec<TheoremRecord> = corpus::read_records(&args.input)?;
    let provider = wiring::chat_provider(config)?;
    let model = config.models.require_variants()?;
    let ctx = VariantContext {
        provider: provider.as_ref(),
        model: &model,
        temperature: config.sampling.temperature,
        max_output_tokens: Some(config.sampling.max_output_tokens),
    };
    let report = expand_dataset(&ctx, &records, config.provider.max_in_flight);
    corpus::write_records(&args.out, &report.variants)?;
    corpus::write_records(&args.quarantine, &report.quarantine)?;
    let provable = records.iter().filter(|record| record.truth_label).count();
    RunManifest::new("variants", config)
        .input(&args.input)
        .output(&args.out)
        .output(&args.quarantine)
        .count("input", records.len())
        .count("provable", provable)
        .count("variants", report.variants.len())
        .count("quarantined", report.quarantine.len())
        .write_beside(&args.out)?;
    println!(
        "generated {} variants from {} provable records ({} quarantined)",
        report.variants.len(),
        provable,
        report.quarantine.len()
    );
    Ok(())
}

/// One rollout line; the truth label is joined from the truths file.
#[derive(Debug, Deserialize)]
struct RolloutRow {
    statement_id: String,
    text: String,
}

/// One truth line. Accepts curated records (`id` + `truth_label`) as well as
/// bespoke files keyed by `statement_id`.
#[derive(Debug, Deserialize)]
struct TruthRow {
    #[serde(alias = "statement_id")]
    id: String,
    truth_label: bool,
}

fn cmd_score_rollouts(args: ScoreRolloutsArgs, config: &PipelineConfig) -> anyhow::Result<()> {
    let rows: Vec<RolloutRow> = corpus::read_jsonl(&args.rollouts)?;
    let truth_rows: Vec<TruthRow> = corpus::read_jsonl(&args.truths)?;
    let mut truths: BTreeMap<String, bool> = BTreeMap::new();
    for row in truth_rows {
        if let Some(previous) = truths.insert(row.id.clone(), row.truth_label) {
            if previous != row.truth_label {
                bail!(
                    "conflicting truth labels for statement `{}` in {}",
                    row.id,
                    args.truths.display()
                );
            }
        }
    }
    let rollouts: Vec<Rollout> = rows
        .into_iter()
        .map(|row| {
            let ground_truth = *truths.get(&row.statement_id).with_context(|| {
                format!(
                    "no truth label for statement `{}` in {}",
                    row.statement_id,
                    args.truths.display()
                )
            })?;
            Ok(Rollout {
                statement_id: row.statement_id,
                text: row.text,
                ground_truth,
            })
        })
        .collect::<anyhow::Result<_>>()?;
    let limits = SanityLimits {
        whitespace_min: config.thresholds.whitespace_min,
        repetition_max: config.thresholds.repetition_max,
    };
    let scored = score_rollouts(&rollouts, &limits, config.grpo.advantage_epsilon)?;
    write_jsonl(&args.out, &scored)?;
    let statements: HashSet<&str> = rollouts
        .iter()
        .map(|rollout| rollout.statement_id.as_str())
        .collect();
    let rewarded = scored.iter().filter(|item| item.breakdown.reward == 1).count();
    RunManifest::new("score-rollouts", config)
        .input(&args.rollouts)
        .input(&args.truths)
        .output(&args.out)
        .count("rollouts", rollouts.len())
        .count("statements", statements.len())
        .count("rewarded", rewarded)
        .write_beside(&args.out)?;
    println!(
        "scored {} rollouts across {} statements; {} earned reward",
        rollouts.len(),
        statements.len(),
        rewarded
    );
    Ok(())
}

fn cmd_eval_outcome(args: EvalArgs, config: &PipelineConfig) -> anyhow::Result<()> {
    let cases: Vec<BenchmarkCase> = corpus::read_records(&args.cases)?;
    let solutions: Vec<Solution> = corpus::read_records(&args.solutions)?;
    let map = solution_map(&solutions);
    let report = emit_report(&cases, &map, None)?;
    write_json(&args.out, &report)?;
    RunManifest::new("eval-outcome", config)
        .input(&args.cases)
        .input(&args.solutions)
        .output(&args.out)
        .count("cases", cases.len())
        .count("solutions", solutions.len())
        .count("benchmarks", report.benchmarks.len())
        .write_beside(&args.out)?;
    print!("{}", report.render_text());
    Ok(())
}

fn cmd_eval_process(args: EvalArgs, config: &PipelineConfig) -> anyhow::Result<()> {
    let cases: Vec<BenchmarkCase> = corpus::read_records(&args.cases)?;
    let solutions: Vec<Solution> = corpus::read_records(&args.solutions)?;
    let map = solution_map(&solutions);
    let provider = wiring::chat_provider(config)?;
    let model = config.models.require_process_judge()?;
    let ctx = ProcessContext {
        provider: provider.as_ref(),
        model: &model,
        max_output_tokens: Some(config.sampling.max_output_tokens),
    };
    let process = evaluate_process(&ctx, &cases, &map, config.provider.max_in_flight);
    let report = emit_report(&cases, &map, Some(&process))?;
    write_json(
        &args.out,
        &serde_json::json!({ "report": report, "process": process }),
    )?;
    RunManifest::new("eval-process", config)
        .input(&args.cases)
        .input(&args.solutions)
        .output(&args.out)
        .count("cases", cases.len())
        .count("solutions", solutions.len())
        .count("scored", process.scored.len())
        .count("failures", process.failures.len())
        .write_beside(&args.out)?;
    print!("{}", report.render_text());
    Ok(())
}

fn cmd_stats(args: StatsArgs, config: &PipelineConfig) -> anyhow::Result<()> {
    let records: Vec<TheoremRecord> = corpus::read_records(&args.input)?;
    let summary = stats::summarize(&records);
    print!("{}", summary.render_text());
    if let Some(out) = &args.out {
        write_json(out, &summary)?;
        RunManifest::new("stats", config)
            .input(&args.input)
            .output(out)
            .count("records", records.len())
            .write_beside(out)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Violation {
    case: String,
    message: String,
}

fn cmd_validate(args: ValidateArgs, config: &PipelineConfig) -> anyhow::Result<()> {
    // read_jsonl, not read_records: invariant violations should be reported
    // below, not abort the read.
    let cases: Vec<BenchmarkCase> = corpus::read_jsonl(&args.cases)?;
    let mut violations: Vec<Violation> = Vec::new();
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for (index, case) in cases.iter().enumerate() {
        for message in case.validate() {
            violations.push(Violation {
                case: case.id.clone(),
                message,
            });
        }
        for message in check_case_consistency(case) {
            violations.push(Violation {
                case: case.id.clone(),
                message,
            });
        }
        if let Some(first) = seen.insert(case.id.as_str(), index) {
            violations.push(Violation {
                case: case.id.clone(),
                message: format!("duplicate case id (first seen at record {})", first + 1),
            });
        }
    }
    if let Some(out) = &args.out {
        write_json(
            out,
            &serde_json::json!({ "cases": cases.len(), "violations": violations }),
        )?;
        RunManifest::new("validate", config)
            .input(&args.cases)
            .output(out)
            .count("cases", cases.len())
            .count("violations", violations.len())
            .write_beside(out)?;
    }
    if violations.is_empty() {
        println!("{} cases OK", cases.len());
        Ok(())
    } else {
        for violation in &violations {
            println!("case `{}`: {}", violation.case, violation.message);
        }
        bail!(
            "{} validation violations in {}",
            violations.len(),
            args.cases.display()
        );
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let body = serde_json::to_string_pretty(value)?;
    std::fs::write(path, body + "\n").with_context(|| format!("cannot write {}", path.display()))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut body = String::new();
    for row in rows {
        body.push_str(&serde_json::to_string(row)?);
        body.push('\n');
    }
    std::fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))
}
