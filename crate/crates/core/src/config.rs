//! Declarative pipeline configuration.
//!
//! One TOML document controls every tunable: provider endpoint and models,
//! cache mode, sampling, thresholds, and advantage-normalization settings.
//! Unknown keys are rejected so typos fail loudly, and the default
//! configuration reproduces the pipeline's canonical constants exactly.
//! Credentials never appear in the file — only the name of the environment
//! variable that holds them.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::providers::cache::CacheMode;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("config is missing required model `{0}`; set it under [models]")]
    MissingModel(&'static str),
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub provider: ProviderConfig,
    pub cache: CacheConfig,
    pub models: ModelsConfig,
    pub sampling: SamplingConfig,
    pub thresholds: ThresholdsConfig,
    pub grpo: GrpoConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// OpenAI-compatible HTTP endpoint.
    Http,
    /// Deterministic in-process mock; no network.
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub base_url: String,
    pub chat_path: String,
    pub embed_path: String,
    /// Environment variable holding the bearer token; None means no auth.
    pub credential_env: Option<String>,
    pub max_in_flight: usize,
    pub retry_max: u32,
    pub retry_base_ms: u64,
    /// Mock-provider substring rules, first match wins (kind = "mock" only).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub mock_replies: Vec<MockReply>,
    /// Mock reply when no rule matches; unset means unmatched is an error.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mock_default_reply: Option<String>,
    /// Dimension of mock embedding vectors (kind = "mock" only).
    pub mock_embedding_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockReply {
    /// Substring matched against the rendered prompt.
    pub contains: String,
    pub reply: String,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderKind::Http,
            base_url: "http://localhost:8000/v1".to_owned(),
            chat_path: "/chat/completions".to_owned(),
            embed_path: "/embeddings".to_owned(),
            credential_env: None,
            max_in_flight: 8,
            retry_max: 3,
            retry_base_ms: 250,
            mock_replies: Vec::new(),
            mock_default_reply: None,
            mock_embedding_dim: 16,
        }
    }
}

impl ProviderConfig {
    /// Resolves the bearer token from the configured environment variable.
    pub fn credential(&self) -> Result<Option<String>, ConfigError> {
        match &self.credential_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| ConfigError::MissingCredential(var.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheConfig {
    pub mode: CacheMode,
    pub dir: PathBuf,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            mode: CacheMode::Passthrough,
            dir: PathBuf::from(".proofpipe-cache"),
        }
    }
}

/// Model names per pipeline role. All optional: a command fails only when it
/// actually needs a role that is unset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelsConfig {
    /// Embedding model for decontamination recall.
    pub embedding: Option<String>,
    /// Judge confirming recalled contamination candidates.
    pub contamination_judge: Option<String>,
    /// Model running the curation stage chain.
    pub curation: Option<String>,
    /// Model generating contradictory variants.
    pub variants: Option<String>,
    /// Judge scoring proofs in process evaluation.
    pub process_judge: Option<String>,
}

impl ModelsConfig {
    fn require(
        value: &Option<String>,
        name: &'static str,
    ) -> Result<String, ConfigError> {
        value.clone().ok_or(ConfigError::MissingModel(name))
    }

    pub fn require_embedding(&self) -> Result<String, ConfigError> {
        Self::require(&self.embedding, "embedding")
    }

    pub fn require_contamination_judge(&self) -> Result<String, ConfigError> {
        Self::require(&self.contamination_judge, "contamination_judge")
    }

    pub fn require_curation(&self) -> Result<String, ConfigError> {
        Self::require(&self.curation, "curation")
    }

    pub fn require_variants(&self) -> Result<String, ConfigError> {
        Self::require(&self.variants, "variants")
    }

    pub fn require_process_judge(&self) -> Result<String, ConfigError> {
        Self::require(&self.process_judge, "process_judge")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            temperature: 0.0,
            max_output_tokens: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdsConfig {
    /// Cosine-similarity recall threshold (strictly exceeded to count).
    pub similarity: f64,
    /// Maximum recalled benchmark items per training sample.
    pub top_k: usize,
    /// Minimum difficulty kept by curation.
    pub min_difficulty: f64,
    /// Minimum whitespace ratio for a rollout to pass the sanity check.
    pub whitespace_min: f64,
    /// Maximum mean repetitions per distinct character.
    pub repetition_max: f64,
}

impl Default for ThresholdsConfig {
    fn default() -> Self {
        ThresholdsConfig {
            similarity: 0.7,
            top_k: 5,
            min_difficulty: 5.0,
            whitespace_min: 0.05,
            repetition_max: 300.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrpoConfig {
    pub group_size: usize,
    pub batch_size: usize,
    pub max_rollout_length: usize,
    pub advantage_epsilon: f64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        GrpoConfig {
            group_size: 64,
            batch_size: 128,
            max_rollout_length: 8192,
            advantage_epsilon: 1e-6,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&raw).map_err(|message| ConfigError::Parse {
            path: path.display().to_string(),
            message,
        })
    }

    pub fn from_toml(raw: &str) -> Result<Self, String> {
        toml::from_str(raw).map_err(|err| err.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialized form; recorded in run manifests.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Flat name → value view of every numeric tunable, for reports.
    pub fn tunables(&self) -> BTreeMap<&'static str, f64> {
        BTreeMap::from([
            ("thresholds.similarity", self.thresholds.similarity),
            ("thresholds.top_k", self.thresholds.top_k as f64),
            ("thresholds.min_difficulty", self.thresholds.min_difficulty),
            ("thresholds.whitespace_min", self.thresholds.whitespace_min),
            ("thresholds.repetition_max", self.thresholds.repetition_max),
            ("grpo.group_size", self.grpo.group_size as f64),
            ("grpo.batch_size", self.grpo.batch_size as f64),
            ("grpo.max_rollout_length", self.grpo.max_rollout_length as f64),
            ("grpo.advantage_epsilon", self.grpo.advantage_epsilon),
            ("sampling.temperature", self.sampling.temperature),
            (
                "sampling.max_output_tokens",
                self.sampling.max_output_tokens as f64,
            ),
        ])
    }
}
