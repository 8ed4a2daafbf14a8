//! Provider construction from the pipeline configuration.
//!
//! Commands ask only for the capability they need — chat or embeddings — and
//! this module decides between a live HTTP client and the deterministic mock.
//! Every chat provider is wrapped in the response cache so record/replay
//! behaves the same regardless of what sits underneath.

use anyhow::Context;
use proofpipe_core::config::{PipelineConfig, ProviderKind};
use proofpipe_core::providers::cache::CachedChatProvider;
use proofpipe_core::providers::http::{HttpProvider, HttpProviderConfig, ReqwestTransport};
use proofpipe_core::providers::mock::{MockChatProvider, MockEmbedder, MockRule};
use proofpipe_core::providers::{ChatProvider, EmbeddingProvider};
use std::time::Duration;

/// Request timeout for live HTTP calls.
const HTTP_TIMEOUT: Duration = Duration::from_secs(120);

/// Builds the chat provider the config describes, wrapped in the response
/// cache.
pub fn chat_provider(config: &PipelineConfig) -> anyhow::Result<Box<dyn ChatProvider>> {
    let inner: Box<dyn ChatProvider> = match config.provider.kind {
        ProviderKind::Mock => Box::new(mock_chat(config)),
        ProviderKind::Http => Box::new(http_provider(config, String::new())?),
    };
    Ok(Box::new(CachedChatProvider::new(
        inner,
        config.cache.mode,
        config.cache.dir.clone(),
    )))
}

/// Builds the embedding provider the config describes.
pub fn embedding_provider(config: &PipelineConfig) -> anyhow::Result<Box<dyn EmbeddingProvider>> {
    match config.provider.kind {
        ProviderKind::Mock => Ok(Box::new(MockEmbedder::new(
            config.provider.mock_embedding_dim,
        ))),
        ProviderKind::Http => {
            let embed_model = config.models.require_embedding()?;
            Ok(Box::new(http_provider(config, embed_model)?))
        }
    }
}

fn mock_chat(config: &PipelineConfig) -> MockChatProvider {
    let rules = config
        .provider
        .mock_replies
        .iter()
        .map(|rule| MockRule::Contains {
            needle: rule.contains.clone(),
            reply: rule.reply.clone(),
        })
        .collect();
    MockChatProvider::from_rules(rules, config.provider.mock_default_reply.clone())
}

fn http_provider(
    config: &PipelineConfig,
    embed_model: String,
) -> anyhow::Result<HttpProvider<ReqwestTransport>> {
    let provider = &config.provider;
    let api_key = provider.credential()?;
    let transport = ReqwestTransport::new(HTTP_TIMEOUT).context("building the HTTP client")?;
    Ok(HttpProvider::new(
        transport,
        HttpProviderConfig {
            base_url: provider.base_url.clone(),
            chat_path: provider.chat_path.clone(),
            embed_path: provider.embed_path.clone(),
            embed_model,
            api_key,
            max_in_flight: provider.max_in_flight,
            retry_max: provider.retry_max,
            retry_base: Duration::from_millis(provider.retry_base_ms),
        },
    ))
}
