//! Content-addressed record/replay cache for chat responses.
//!
//! The cache key is a SHA-256 digest of the canonicalized request: the model
//! name, the temperature, and both prompts with trailing whitespace trimmed.
//! Each response lives in its own JSON file named by the key, so cache
//! directories can be diffed, pruned, and committed as test fixtures.

use super::{ChatProvider, ChatRequest, ChatResponse, ProviderError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheMode {
    /// Serve from cache when possible, otherwise call through and store.
    Record,
    /// Serve from cache only; a miss is an error. Guarantees zero network.
    Replay,
    /// Ignore the cache entirely.
    Passthrough,
}

/// Stable content address for a chat request.
pub fn cache_key(request: &ChatRequest) -> String {
    #[derive(Serialize)]
    struct Canonical<'a> {
        model: &'a str,
        system_prompt: Option<&'a str>,
        user_prompt: &'a str,
        temperature: f64,
    }
    let canonical = Canonical {
        model: &request.model,
        system_prompt: request.system_prompt.as_deref().map(str::trim_end),
        user_prompt: request.user_prompt.trim_end(),
        temperature: request.temperature,
    };
    let bytes = serde_json::to_vec(&canonical).expect("canonical request serializes");
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        write!(hex, "{byte:02x}").expect("writing to string cannot fail");
    }
    hex
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    request: ChatRequest,
    response: ChatResponse,
}

/// Wraps any chat provider with record/replay semantics.
pub struct CachedChatProvider<P> {
    inner: P,
    mode: CacheMode,
    dir: PathBuf,
    write_lock: Mutex<()>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<P> CachedChatProvider<P> {
    pub fn new(inner: P, mode: CacheMode, dir: impl Into<PathBuf>) -> Self {
        CachedChatProvider {
            inner,
            mode,
            dir: dir.into(),
            write_lock: Mutex::new(()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::SeqCst)
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn read_entry(&self, key: &str) -> Result<Option<ChatResponse>, ProviderError> {
        let path = self.entry_path(key);
        let raw = match std::fs::read_to_string(&path) {
            Ok(raw) => raw,
            Err(err) if err.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(err) => {
                return Err(ProviderError::Cache(format!(
                    "{}: {err}",
                    path.display()
                )))
            }
        };
        let entry: CacheEntry = serde_json::from_str(&raw).map_err(|err| {
            ProviderError::Cache(format!("{}: corrupt entry: {err}", path.display()))
        })?;
        Ok(Some(entry.response))
    }

    fn write_entry(
        &self,
        key: &str,
        request: &ChatRequest,
        response: &ChatResponse,
    ) -> Result<(), ProviderError> {
        let _guard = self.write_lock.lock().expect("cache lock poisoned");
        std::fs::create_dir_all(&self.dir)
            .map_err(|err| ProviderError::Cache(format!("{}: {err}", self.dir.display())))?;
        let entry = CacheEntry {
            request: request.clone(),
            response: response.clone(),
        };
        let payload =
            serde_json::to_vec_pretty(&entry).expect("cache entry serializes");
        let path = self.entry_path(key);
        let tmp = self.dir.join(format!(
            "{key}.tmp-{}",
            std::process::id()
        ));
        std::fs::write(&tmp, payload)
            .and_then(|()| std::fs::rename(&tmp, &path))
            .map_err(|err| ProviderError::Cache(format!("{}: {err}", path.display())))
    }
}

/// Seeds a cache directory with a canned response, bypassing any provider.
/// Used to build replay fixtures.
pub fn seed_cache(
    dir: impl AsRef<Path>,
    request: &ChatRequest,
    response: &ChatResponse,
) -> Result<String, ProviderError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)
        .map_err(|err| ProviderError::Cache(format!("{}: {err}", dir.display())))?;
    let key = cache_key(request);
    let entry = CacheEntry {
        request: request.clone(),
        response: response.clone(),
    };
    let payload = serde_json::to_vec_pretty(&entry).expect("cache entry serializes");
    let path = dir.join(format!("{key}.json"));
    std::fs::write(&path, payload)
        .map_err(|err| ProviderError::Cache(format!("{}: {err}", path.display())))?;
    Ok(key)
}

impl<P: ChatProvider> ChatProvider for CachedChatProvider<P> {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        match self.mode {
            CacheMode::Passthrough => self.inner.chat(request),
            CacheMode::Replay => {
                let key = cache_key(request);
                match self.read_entry(&key)? {
                    Some(response) => {
                        self.hits.fetch_add(1, Ordering::SeqCst);
                        Ok(response)
                    }
                    None => {
                        self.misses.fetch_add(1, Ordering::SeqCst);
                        Err(ProviderError::CacheMiss { key })
                    }
                }
            }
            CacheMode::Record => {
                let key = cache_key(request);
                if let Some(response) = self.read_entry(&key)? {
                    self.hits.fetch_add(1, Ordering::SeqCst);
                    return Ok(response);
                }
                self.misses.fetch_add(1, Ordering::SeqCst);
                let response = self.inner.chat(request)?;
                self.write_entry(&key, request, &response)?;
                Ok(response)
            }
        }
    }
}
