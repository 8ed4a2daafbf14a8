//! HTTP chat and embedding providers speaking the common OpenAI-style wire
//! format (`/chat/completions`, `/embeddings`).
//!
//! Network I/O goes through the [`HttpTransport`] trait so tests can inject
//! status sequences and malformed bodies without opening sockets. The real
//! transport, [`ReqwestTransport`], is available behind the `http` feature
//! (enabled by default).
//!
//! Retry policy: client errors (4xx) are configuration mistakes and fail
//! immediately; server errors (5xx) and transport failures retry with
//! exponential backoff (`retry_base * 2^attempt`) up to `retry_max` retries.

use super::{
    ChatProvider, ChatRequest, ChatResponse, EmbeddingProvider, EmbeddingVector, FinishReason,
    ProviderError, Semaphore,
};
use serde::Deserialize;
use serde_json::{json, Value};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

/// Minimal HTTP seam: POST a JSON body, get back a status code and body text.
pub trait HttpTransport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        bearer_token: Option<&str>,
        body: &Value,
    ) -> Result<(u16, String), String>;
}

impl<T: HttpTransport + ?Sized> HttpTransport for &T {
    fn post_json(
        &self,
        url: &str,
        bearer_token: Option<&str>,
        body: &Value,
    ) -> Result<(u16, String), String> {
        (**self).post_json(url, bearer_token, body)
    }
}

/// Connection settings shared by the chat and embedding providers.
#[derive(Debug, Clone)]
pub struct HttpProviderConfig {
    pub base_url: String,
    pub chat_path: String,
    pub embed_path: String,
    /// Model sent with embedding requests (chat requests carry their own).
    pub embed_model: String,
    pub api_key: Option<String>,
    pub max_in_flight: usize,
    pub retry_max: u32,
    pub retry_base: Duration,
}

impl Default for HttpProviderConfig {
    fn default() -> Self {
        HttpProviderConfig {
            base_url: "http://localhost:8000/v1".to_owned(),
            chat_path: "/chat/completions".to_owned(),
            embed_path: "/embeddings".to_owned(),
            embed_model: "text-embedding".to_owned(),
            api_key: None,
            max_in_flight: 8,
            retry_max: 3,
            retry_base: Duration::from_millis(250),
        }
    }
}

impl HttpProviderConfig {
    fn chat_url(&self) -> String {
        join_url(&self.base_url, &self.chat_path)
    }

    fn embed_url(&self) -> String {
        join_url(&self.base_url, &self.embed_path)
    }
}

fn join_url(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path.trim_start_matches('/'))
}

/// Chat + embeddings over an injected transport, with bounded concurrency and
/// retry accounting.
pub struct HttpProvider<T> {
    transport: T,
    config: HttpProviderConfig,
    semaphore: Semaphore,
    retries: AtomicU64,
    sleep: fn(Duration),
}

impl<T: HttpTransport> HttpProvider<T> {
    pub fn new(transport: T, config: HttpProviderConfig) -> Self {
        let permits = config.max_in_flight;
        HttpProvider {
            transport,
            config,
            semaphore: Semaphore::new(permits),
            retries: AtomicU64::new(0),
            sleep: std::thread::sleep,
        }
    }

    /// Replaces the backoff sleeper; tests use a no-op to avoid real delays.
    pub fn with_sleeper(mut self, sleep: fn(Duration)) -> Self {
        self.sleep = sleep;
        self
    }

    /// Total retry attempts made since construction (not counting first tries).
    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::SeqCst)
    }

    fn post_with_retry(&self, url: &str, body: &Value) -> Result<String, ProviderError> {
        let _permit = self.semaphore.acquire();
        let mut last_error = String::new();
        for attempt in 0..=self.config.retry_max {
            if attempt > 0 {
                self.retries.fetch_add(1, Ordering::SeqCst);
                let backoff = self.config.retry_base * 2u32.saturating_pow(attempt - 1);
                (self.sleep)(backoff);
            }
            match self
                .transport
                .post_json(url, self.config.api_key.as_deref(), body)
            {
                Ok((status, text)) if (200..300).contains(&status) => return Ok(text),
                Ok((status, text)) if (400..500).contains(&status) => {
                    return Err(ProviderError::Config(format!(
                        "{url}: HTTP {status}: {}",
                        truncate(&text, 200)
                    )));
                }
                Ok((status, text)) => {
                    last_error = format!("HTTP {status}: {}", truncate(&text, 200));
                }
                Err(err) => last_error = err,
            }
        }
        Err(ProviderError::RetriesExhausted {
            attempts: self.config.retry_max + 1,
            last: format!("{url}: {last_error}"),
        })
    }
}

fn truncate(text: &str, max_chars: usize) -> &str {
    match text.char_indices().nth(max_chars) {
        Some((idx, _)) => &text[..idx],
        None => text,
    }
}

#[derive(Deserialize)]
struct ChatCompletionBody {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessageBody,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChatMessageBody {
    content: Option<String>,
}

impl<T: HttpTransport> ChatProvider for HttpProvider<T> {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let mut messages = Vec::new();
        if let Some(system) = &request.system_prompt {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": request.user_prompt}));
        let mut body = json!({
            "model": request.model,
            "messages": messages,
            "temperature": request.temperature,
        });
        if let Some(max_tokens) = request.max_output_tokens {
            body["max_tokens"] = json!(max_tokens);
        }

        let url = self.config.chat_url();
        let text = self.post_with_retry(&url, &body)?;
        let parsed: ChatCompletionBody = serde_json::from_str(&text).map_err(|err| {
            ProviderError::MalformedResponse(format!("{url}: {err}: {}", truncate(&text, 200)))
        })?;
        let choice = parsed.choices.into_iter().next().ok_or_else(|| {
            ProviderError::MalformedResponse(format!("{url}: response has no choices"))
        })?;
        let finish_reason = match choice.finish_reason.as_deref() {
            Some("stop") | None => FinishReason::Stop,
            Some("length") => FinishReason::Length,
            Some(_) => FinishReason::Error,
        };
        Ok(ChatResponse {
            text: choice.message.content.unwrap_or_default(),
            finish_reason,
            provider_meta: std::collections::BTreeMap::new(),
        })
    }
}

#[derive(Deserialize)]
struct EmbeddingBody {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

impl<T: HttpTransport> EmbeddingProvider for HttpProvider<T> {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(ProviderError::EmptyInput);
        }
        let body = json!({"model": self.config.embed_model, "input": texts});
        let url = self.config.embed_url();
        let text = self.post_with_retry(&url, &body)?;
        let parsed: EmbeddingBody = serde_json::from_str(&text).map_err(|err| {
            ProviderError::MalformedResponse(format!("{url}: {err}: {}", truncate(&text, 200)))
        })?;
        if parsed.data.len() != texts.len() {
            return Err(ProviderError::MalformedResponse(format!(
                "{url}: asked for {} embeddings, got {}",
                texts.len(),
                parsed.data.len()
            )));
        }
        let mut ordered = parsed.data;
        ordered.sort_by_key(|datum| datum.index);
        let mut dim = None;
        let mut vectors = Vec::with_capacity(ordered.len());
        for datum in ordered {
            match dim {
                None => dim = Some(datum.embedding.len()),
                Some(expected) if expected != datum.embedding.len() => {
                    return Err(ProviderError::DimensionMismatch {
                        expected,
                        actual: datum.embedding.len(),
                    });
                }
                Some(_) => {}
            }
            vectors.push(EmbeddingVector::from_raw(datum.embedding)?);
        }
        Ok(vectors)
    }
}

/// Real transport over a blocking reqwest client.
#[cfg(feature = "http")]
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

#[cfg(feature = "http")]
impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|err| ProviderError::Config(format!("http client: {err}")))?;
        Ok(ReqwestTransport { client })
    }
}

#[cfg(feature = "http")]
impl HttpTransport for ReqwestTransport {
    fn post_json(
        &self,
        url: &str,
        bearer_token: Option<&str>,
        body: &Value,
    ) -> Result<(u16, String), String> {
        let mut builder = self.client.post(url).json(body);
        if let Some(token) = bearer_token {
            builder = builder.bearer_auth(token);
        }
        let response = builder.send().map_err(|err| err.to_string())?;
        let status = response.status().as_u16();
        let text = response.text().map_err(|err| err.to_string())?;
        Ok((status, text))
    }
}
