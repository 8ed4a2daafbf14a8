//! Chat-completion and embedding providers.
//!
//! The pipeline talks to language models through two narrow traits so that
//! every stage can run against an HTTP endpoint, a deterministic mock, or a
//! replay cache interchangeably. Providers are safe to share across worker
//! threads; the HTTP client bounds in-flight requests with a semaphore and
//! retries transient failures with exponential backoff.

pub mod cache;
pub mod http;
pub mod mock;
mod payload;

pub use payload::parse_json_payload;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    /// Bad request or local misconfiguration (HTTP 4xx); never retried.
    #[error("provider configuration error: {0}")]
    Config(String),
    /// Transient failure (HTTP 5xx or transport); retried with backoff.
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("giving up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("replay cache miss for request {key}")]
    CacheMiss { key: String },
    #[error("cache failure: {0}")]
    Cache(String),
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("cannot embed an empty string")]
    EmptyInput,
    #[error("embedding dimensions disagree: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("mock provider has no reply for prompt starting with {prefix:?}")]
    NoMockReply { prefix: String },
}

/// A single-turn chat completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_prompt: Option<String>,
    pub user_prompt: String,
    pub model: String,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_output_tokens: Option<u32>,
}

impl ChatRequest {
    /// Plain user-prompt request with the pipeline default temperature 0.
    pub fn new(model: impl Into<String>, user_prompt: impl Into<String>) -> Self {
        ChatRequest {
            system_prompt: None,
            user_prompt: user_prompt.into(),
            model: model.into(),
            temperature: 0.0,
            max_output_tokens: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub provider_meta: BTreeMap<String, String>,
}

impl ChatResponse {
    pub fn stopped(text: impl Into<String>) -> Self {
        ChatResponse {
            text: text.into(),
            finish_reason: FinishReason::Stop,
            provider_meta: BTreeMap::new(),
        }
    }
}

/// An L2-normalized embedding. The stored values always have unit norm; the
/// pre-normalization magnitude is kept alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    norm: f64,
}

impl EmbeddingVector {
    /// Normalizes raw provider output. Zero-magnitude or non-finite input is
    /// rejected because similarity against it is undefined.
    pub fn from_raw(values: Vec<f64>) -> Result<Self, ProviderError> {
        if values.is_empty() {
            return Err(ProviderError::MalformedResponse(
                "embedding has zero dimensions".to_owned(),
            ));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm <= 0.0 {
            return Err(ProviderError::MalformedResponse(format!(
                "embedding norm {norm} is not a positive finite number"
            )));
        }
        let values = values.into_iter().map(|v| v / norm).collect();
        Ok(EmbeddingVector { values, norm })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// L2 norm of the raw vector before normalization; always > 0.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub trait ChatProvider: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError>;
}

pub trait EmbeddingProvider: Send + Sync {
    /// Embeds a batch of texts. Every vector in the batch has the same
    /// dimension and unit norm. Empty input strings are rejected.
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for &P {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        (**self).chat(request)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for &P {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        (**self).embed(texts)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for Box<P> {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        (**self).chat(request)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        (**self).embed(texts)
    }
}

/// Counting semaphore bounding concurrent provider calls.
pub struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Semaphore {
            permits: Mutex::new(permits.max(1)),
            available: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().expect("semaphore poisoned");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("semaphore poisoned");
        }
        *permits -= 1;
        SemaphoreGuard { semaphore: self }
    }
}

pub struct SemaphoreGuard<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.semaphore.permits.lock().expect("semaphore poisoned");
        *permits += 1;
        self.semaphore.available.notify_one();
    }
}

/// Maps `f` over `items` with up to `workers` threads, returning results in
/// input order. The reduction is order-insensitive internally, so output is
/// independent of scheduling. Panics in `f` propagate.
pub fn parallel_map<T, U, F>(items: &[T], workers: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    let workers = workers.max(1).min(items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<U>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if index >= items.len() {
                    break;
                }
                let result = f(&items[index]);
                *slots[index].lock().expect("slot poisoned") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .expect("slot poisoned")
                .expect("worker filled every slot")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_vectors_are_normalized_on_construction() {
        let v = EmbeddingVector::from_raw(vec![3.0, 4.0]).unwrap();
        assert!((v.norm() - 5.0).abs() < 1e-12);
        assert!((v.values()[0] - 0.6).abs() < 1e-12);
        assert!((v.values()[1] - 0.8).abs() < 1e-12);
        let magnitude: f64 = v.values().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((magnitude - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_vectors_are_rejected() {
        assert!(EmbeddingVector::from_raw(vec![0.0, 0.0]).is_err());
        assert!(EmbeddingVector::from_raw(vec![]).is_err());
        assert!(EmbeddingVector::from_raw(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn parallel_map_preserves_input_order() {
        let items: Vec<u64> = (0..100).collect();
        let doubled = parallel_map(&items, 4, |x| x * 2);
        assert_eq!(doubled, items.iter().map(|x| x * 2).collect::<Vec<_>>());
        let empty: Vec<u64> = Vec::new();
        assert_eq!(parallel_map(&empty, 4, |x| x * 2), Vec::<u64>::new());
        assert_eq!(parallel_map(&items, 1, |x| x + 1)[99], 100);
    }

    #[test]
    fn semaphore_bounds_concurrency() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        use std::sync::Arc;

        let semaphore = Arc::new(Semaphore::new(2));
        let in_flight = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let mut handles = Vec::new();
        for _ in 0..8 {
            let semaphore = Arc::clone(&semaphore);
            let in_flight = Arc::clone(&in_flight);
            let peak = Arc::clone(&peak);
            handles.push(std::thread::spawn(move || {
                let _guard = semaphore.acquire();
                let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                peak.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(std::time::Duration::from_millis(5));
                in_flight.fetch_sub(1, Ordering::SeqCst);
            }));
        }
        for handle in handles {
            handle.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2, "more than 2 calls in flight");
    }
}
