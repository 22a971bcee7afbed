//! External model services: a chat LLM plus content and style embedders.
//!
//! Everything above this module talks to the [`ChatProvider`] and
//! [`EmbeddingProvider`] traits only. Real services are reached over HTTP
//! ([`http`]); tests and offline runs use the deterministic mocks in
//! [`mock`] and the transcript replayer in [`scripted`].

pub mod cache;
pub mod http;
pub mod limit;
pub mod mock;
pub mod scripted;
pub mod structured;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{Space, Vector};

pub use cache::{embed_cached, CachedEmbedder, EmbeddingCache, EvictionPolicy};
pub use limit::{CallMeter, InFlightLimiter, Limited, Metered};
pub use structured::{complete_structured, PayloadSchema, StructuredError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("provider rejected the request with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("provider returned an unusable response: {0}")]
    Protocol(String),
    #[error("transcript turn {turn}: prompt is missing expected text {missing:?}\n--- prompt ---\n{prompt}")]
    ReplayMismatch { turn: usize, missing: Vec<String>, prompt: String },
    #[error("transcript exhausted after {turns} turns")]
    ReplayExhausted { turns: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatInfo {
    pub model_id: String,
    pub max_input_chars: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingInfo {
    pub model_id: String,
    pub space: Space,
    pub dim: usize,
}

/// Result of a cheap liveness probe. Never calls a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reachability {
    pub reachable: bool,
    pub detail: String,
}

impl Reachability {
    pub fn local() -> Self {
        Self { reachable: true, detail: "in-process".into() }
    }
}

pub trait ChatProvider: Send + Sync {
    fn info(&self) -> &ChatInfo;

    /// Sends one prompt and returns the raw reply text. `schema_hint` is the
    /// expected payload shape, for services that support constrained output.
    fn complete(&self, prompt: &str, schema_hint: Option<&str>) -> Result<String, ProviderError>;

    fn reachability(&self) -> Reachability {
        Reachability::local()
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn info(&self) -> &EmbeddingInfo;

    /// One vector per input text, in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>, ProviderError>;

    fn reachability(&self) -> Reachability {
        Reachability::local()
    }
}

impl<T: ChatProvider + ?Sized> ChatProvider for Arc<T> {
    fn info(&self) -> &ChatInfo {
        (**self).info()
    }

    fn complete(&self, prompt: &str, schema_hint: Option<&str>) -> Result<String, ProviderError> {
        (**self).complete(prompt, schema_hint)
    }

    fn reachability(&self) -> Reachability {
        (**self).reachability()
    }
}

impl<T: EmbeddingProvider + ?Sized> EmbeddingProvider for Arc<T> {
    fn info(&self) -> &EmbeddingInfo {
        (**self).info()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>, ProviderError> {
        (**self).embed(texts)
    }

    fn reachability(&self) -> Reachability {
        (**self).reachability()
    }
}

/// Checks that a provider honoured its declared shape.
pub(crate) fn check_embeddings(info: &EmbeddingInfo, requested: usize, got: &[Vector]) -> Result<(), ProviderError> {
    if got.len() != requested {
        return Err(ProviderError::Protocol(format!(
            "{} returned {} vectors for {} texts",
            info.model_id,
            got.len(),
            requested
        )));
    }
    for v in got {
        if v.space() != info.space || v.dim() != info.dim {
            return Err(ProviderError::Protocol(format!(
                "{} returned a {} vector of dim {}, declared {} dim {}",
                info.model_id,
                v.space(),
                v.dim(),
                info.space,
                info.dim
            )));
        }
    }
    Ok(())
}
