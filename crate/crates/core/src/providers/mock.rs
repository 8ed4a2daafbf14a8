//! Deterministic offline providers for tests and dry runs.

use super::{
    ChatProvider, ChatRequest, ChatResponse, EmbeddingProvider, EmbeddingVector, ProviderError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

/// How a mock rule matches an incoming user prompt.
#[derive(Debug, Clone)]
pub enum MockRule {
    /// Reply when the user prompt equals `prompt` exactly.
    Exact { prompt: String, reply: String },
    /// Reply when the user prompt contains `needle`.
    Contains { needle: String, reply: String },
}

enum Responder {
    Fixed(String),
    Rules {
        rules: Vec<MockRule>,
        default: Option<String>,
    },
    Handler(Box<dyn Fn(&ChatRequest) -> ChatResponse + Send + Sync>),
}

/// Scriptable chat provider. Replies are a pure function of the request, so
/// repeated runs are byte-identical; a call counter makes call economy
/// observable in tests.
pub struct MockChatProvider {
    responder: Responder,
    calls: AtomicU64,
}

impl MockChatProvider {
    /// Always replies with the same text.
    pub fn fixed(reply: impl Into<String>) -> Self {
        MockChatProvider {
            responder: Responder::Fixed(reply.into()),
            calls: AtomicU64::new(0),
        }
    }

    /// Replies via an exact user-prompt → reply mapping; unmapped prompts are
    /// an error.
    pub fn from_exact_map(map: BTreeMap<String, String>) -> Self {
        let rules = map
            .into_iter()
            .map(|(prompt, reply)| MockRule::Exact { prompt, reply })
            .collect();
        MockChatProvider {
            responder: Responder::Rules {
                rules,
                default: None,
            },
            calls: AtomicU64::new(0),
        }
    }

    /// First matching rule wins; `default` (when given) catches the rest.
    pub fn from_rules(rules: Vec<MockRule>, default: Option<String>) -> Self {
        MockChatProvider {
            responder: Responder::Rules { rules, default },
            calls: AtomicU64::new(0),
        }
    }

    /// Fully scripted responder for fixtures that need finish reasons or
    /// per-request logic.
    pub fn from_handler(
        handler: impl Fn(&ChatRequest) -> ChatResponse + Send + Sync + 'static,
    ) -> Self {
        MockChatProvider {
            responder: Responder::Handler(Box::new(handler)),
            calls: AtomicU64::new(0),
        }
    }

    /// Number of chat calls served so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatProvider for MockChatProvider {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        match &self.responder {
            Responder::Fixed(reply) => Ok(ChatResponse::stopped(reply.clone())),
            Responder::Rules { rules, default } => {
                for rule in rules {
                    match rule {
                        MockRule::Exact { prompt, reply } if *prompt == request.user_prompt => {
                            return Ok(ChatResponse::stopped(reply.clone()));
                        }
                        MockRule::Contains { needle, reply }
                            if request.user_prompt.contains(needle.as_str()) =>
                        {
                            return Ok(ChatResponse::stopped(reply.clone()));
                        }
                        _ => {}
                    }
                }
                match default {
                    Some(reply) => Ok(ChatResponse::stopped(reply.clone())),
                    None => Err(ProviderError::NoMockReply {
                        prefix: request.user_prompt.chars().take(40).collect(),
                    }),
                }
            }
            Responder::Handler(handler) => Ok(handler(request)),
        }
    }
}

/// Deterministic embedder: each text maps to a unit vector seeded from its
/// SHA-256 hash, so identical texts embed identically across runs and
/// platforms while distinct texts land nearly orthogonal in high dimension.
/// Specific texts can be pinned to chosen raw vectors for similarity
/// fixtures.
pub struct MockEmbedder {
    dim: usize,
    overrides: BTreeMap<String, Vec<f64>>,
    calls: AtomicU64,
}

impl MockEmbedder {
    pub fn new(dim: usize) -> Self {
        MockEmbedder {
            dim: dim.max(1),
            overrides: BTreeMap::new(),
            calls: AtomicU64::new(0),
        }
    }

    /// Pins `text` to a raw (pre-normalization) vector of this embedder's
    /// dimension.
    pub fn with_override(mut self, text: impl Into<String>, raw: Vec<f64>) -> Self {
        self.overrides.insert(text.into(), raw);
        self
    }

    /// Number of embed batch calls served so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    fn vector_for(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        if text.is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        if let Some(raw) = self.overrides.get(text) {
            if raw.len() != self.dim {
                return Err(ProviderError::DimensionMismatch {
                    expected: self.dim,
                    actual: raw.len(),
                });
            }
            return EmbeddingVector::from_raw(raw.clone());
        }
        let digest = Sha256::digest(text.as_bytes());
        let seed = u64::from_le_bytes(digest[..8].try_into().expect("eight bytes"));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut raw: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // A zero vector is astronomically unlikely but would break
        // normalization, so nudge the first component if it happens.
        if raw.iter().all(|v| *v == 0.0) {
            raw[0] = 1.0;
        }
        EmbeddingVector::from_raw(raw)
    }
}

impl EmbeddingProvider for MockEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        texts.iter().map(|text| self.vector_for(text)).collect()
    }
}
