//! Verifiable binary rewards for proof rollouts and GRPO group advantages.
//!
//! A rollout earns reward 1 exactly when its extracted verdict (the last
//! `\boxed{...}` token, restricted to the last complete `<answer>` span when
//! one exists) matches the statement's ground truth and the text passes two
//! anti-collapse sanity checks: enough whitespace and not too much character
//! repetition. Advantages normalize each group's rewards by the group mean
//! and population spread.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Default minimum whitespace ratio for the sanity check.
pub const WHITESPACE_MIN: f64 = 0.05;
/// Default maximum mean repetitions per distinct character.
pub const REPETITION_MAX: f64 = 300.0;
/// Default denominator floor for advantage normalization.
pub const ADVANTAGE_EPSILON: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum RewardError {
    #[error("advantage group has {0} rollouts; need at least 2")]
    GroupTooSmall(usize),
    #[error("reward at index {0} is not finite")]
    NonFiniteReward(usize),
}

/// The final claim extracted from a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Proved,
    Disproved,
    None,
}

impl Verdict {
    /// The verdict asserting the given truth label.
    pub fn for_label(label: bool) -> Verdict {
        if label {
            Verdict::Proved
        } else {
            Verdict::Disproved
        }
    }

    /// Proved ↔ Disproved; None stays None.
    pub fn inverted(self) -> Verdict {
        match self {
            Verdict::Proved => Verdict::Disproved,
            Verdict::Disproved => Verdict::Proved,
            Verdict::None => Verdict::None,
        }
    }

    /// Whether this verdict asserts the label (None never matches).
    pub fn matches_label(self, label: bool) -> bool {
        self == Verdict::for_label(label)
    }
}

/// A single model output to score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub statement_id: String,
    pub text: String,
    /// true = the statement is provable.
    pub ground_truth: bool,
}

/// Everything the reward decision was based on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub verdict: Verdict,
    pub whitespace_ratio: f64,
    pub repetition_count: f64,
    pub sanity_ok: bool,
    pub reward: u8,
}

/// Sanity-check limits; defaults are the canonical pipeline values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SanityLimits {
    pub whitespace_min: f64,
    pub repetition_max: f64,
}

impl Default for SanityLimits {
    fn default() -> Self {
        SanityLimits {
            whitespace_min: WHITESPACE_MIN,
            repetition_max: REPETITION_MAX,
        }
    }
}

/// Byte range of the last complete `<answer>...</answer>` content, if any.
///
/// Tags pair greedily left to right: an `<answer>` opens a span (nested opens
/// are ignored), the next `</answer>` closes it.
fn last_answer_span(text: &str) -> Option<std::ops::Range<usize>> {
    const OPEN: &str = "<answer>";
    const CLOSE: &str = "</answer>";
    let mut spans: Option<std::ops::Range<usize>> = None;
    let mut open: Option<usize> = None;
    let mut cursor = 0;
    while cursor < text.len() {
        let rest = &text[cursor..];
        let next_open = rest.find(OPEN);
        let next_close = rest.find(CLOSE);
        match (next_open, next_close) {
            (None, None) => break,
            (Some(o), c) if c.is_none_or(|c| o < c) && open.is_none() => {
                open = Some(cursor + o + OPEN.len());
                cursor += o + OPEN.len();
            }
            (Some(o), Some(c)) if o < c => {
                // Nested open while a span is active: ignore it.
                cursor += o + OPEN.len();
            }
            (_, Some(c)) => {
                if let Some(start) = open.take() {
                    spans = Some(start..cursor + c);
                }
                cursor += c + CLOSE.len();
            }
            (Some(_), None) => break,
        }
    }
    spans
}

/// The content of the last complete `\boxed{...}` in the text, tracking brace
/// depth so nested braces stay inside the token; unclosed boxes are skipped.
fn last_boxed_token(text: &str) -> Option<&str> {
    const MARKER: &str = "\\boxed{";
    let mut last = None;
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
                last = Some(&text[start..end]);
                cursor = end + 1;
            }
            // Unclosed box: skip just the marker and keep scanning.
            None => cursor = start,
        }
    }
    last
}

/// Extracts the rollout's final verdict.
///
/// If the text contains a complete `<answer>...</answer>` span, only the last
/// such span is searched; otherwise the whole text is. The last complete
/// boxed token decides: "proved" or "disproved" (case-insensitive, trimmed),
/// anything else — or no box at all — yields [`Verdict::None`].
pub fn extract_verdict(text: &str) -> Verdict {
    let region = match last_answer_span(text) {
        Some(range) => &text[range],
        None => text,
    };
    match last_boxed_token(region) {
        Some(token) => match token.trim().to_lowercase().as_str() {
            "proved" => Verdict::Proved,
            "disproved" => Verdict::Disproved,
            _ => Verdict::None,
        },
        None => Verdict::None,
    }
}

/// Fraction of characters that are Unicode whitespace; empty text → 0.
pub fn whitespace_ratio(text: &str) -> f64 {
    let mut total = 0usize;
    let mut whitespace = 0usize;
    for ch in text.chars() {
        total += 1;
        if ch.is_whitespace() {
            whitespace += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        whitespace as f64 / total as f64
    }
}

/// Mean occurrences per distinct character: total chars / distinct chars.
/// Empty text → 0. A collapsed output cycling a few characters scores in the
/// thousands; ordinary prose stays near 100.
pub fn repetition_count(text: &str) -> f64 {
    let mut total = 0usize;
    // ASCII dominates rollout text; a flag table avoids hashing every char.
    let mut seen_ascii = [false; 128];
    let mut seen_other = std::collections::HashSet::new();
    for ch in text.chars() {
        total += 1;
        if (ch as u32) < 128 {
            seen_ascii[ch as usize] = true;
        } else {
            seen_other.insert(ch);
        }
    }
    let distinct = seen_ascii.iter().filter(|seen| **seen).count() + seen_other.len();
    if total == 0 {
        0.0
    } else {
        total as f64 / distinct as f64
    }
}

/// Scores one rollout against the default sanity limits.
pub fn compute_reward(rollout: &Rollout) -> RewardBreakdown {
    compute_reward_with_limits(rollout, &SanityLimits::default())
}

/// Scores one rollout. Reward is 1 exactly when the sanity checks pass and
/// the verdict asserts the ground truth; a missing verdict never scores.
pub fn compute_reward_with_limits(rollout: &Rollout, limits: &SanityLimits) -> RewardBreakdown {
    let verdict = extract_verdict(&rollout.text);
    let whitespace_ratio = whitespace_ratio(&rollout.text);
    let repetition_count = repetition_count(&rollout.text);
    let sanity_ok =
        whitespace_ratio >= limits.whitespace_min && repetition_count <= limits.repetition_max;
    let reward = u8::from(sanity_ok && verdict.matches_label(rollout.ground_truth));
    RewardBreakdown {
        verdict,
        whitespace_ratio,
        repetition_count,
        sanity_ok,
        reward,
    }
}

/// Group-normalized advantages with the default epsilon.
pub fn grpo_advantages(rewards: &[f64]) -> Result<Vec<f64>, RewardError> {
    grpo_advantages_with_epsilon(rewards, ADVANTAGE_EPSILON)
}

/// a_i = (r_i − mean) / max(population std, ε). A group with identical
/// rewards short-circuits to exact zeros. Groups need at least 2 rollouts.
pub fn grpo_advantages_with_epsilon(
    rewards: &[f64],
    epsilon: f64,
) -> Result<Vec<f64>, RewardError> {
    if rewards.len() < 2 {
        return Err(RewardError::GroupTooSmall(rewards.len()));
    }
    if let Some(bad) = rewards.iter().position(|r| !r.is_finite()) {
        return Err(RewardError::NonFiniteReward(bad));
    }
    if rewards.iter().all(|r| *r == rewards[0]) {
        return Ok(vec![0.0; rewards.len()]);
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let variance = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let denom = variance.sqrt().max(epsilon);
    Ok(rewards.iter().map(|r| (r - mean) / denom).collect())
}

/// A scored rollout with its group-relative advantage when the statement's
/// group had at least two rollouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRollout {
    pub statement_id: String,
    #[serde(flatten)]
    pub breakdown: RewardBreakdown,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub advantage: Option<f64>,
}

/// Scores every rollout and computes advantages per statement group.
/// Rollouts sharing a statement_id form one group; singleton groups carry no
/// advantage. Output order matches input order.
pub fn score_rollouts(
    rollouts: &[Rollout],
    limits: &SanityLimits,
    epsilon: f64,
) -> Result<Vec<ScoredRollout>, RewardError> {
    let breakdowns: Vec<RewardBreakdown> = rollouts
        .iter()
        .map(|r| compute_reward_with_limits(r, limits))
        .collect();
    let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
    for (index, rollout) in rollouts.iter().enumerate() {
        groups.entry(&rollout.statement_id).or_default().push(index);
    }
    let mut advantages: Vec<Option<f64>> = vec![None; rollouts.len()];
    for members in groups.values() {
        if members.len() < 2 {
            continue;
        }
        let rewards: Vec<f64> = members
            .iter()
            .map(|&i| f64::from(breakdowns[i].reward))
            .collect();
        let group_advantages = grpo_advantages_with_epsilon(&rewards, epsilon)?;
        for (&index, advantage) in members.iter().zip(group_advantages) {
            advantages[index] = Some(advantage);
        }
    }
    Ok(rollouts
        .iter()
        .zip(breakdowns)
        .zip(advantages)
        .map(|((rollout, breakdown), advantage)| ScoredRollout {
            statement_id: rollout.statement_id.clone(),
            breakdown,
            advantage,
        })
        .collect())
}
