//! Service and CLI configuration: a TOML file plus `WD_*` overrides.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anchors::{AnchorSet, DEFAULT_REGISTRY};
use crate::detector::DEFAULT_RETRIES;
use crate::domain::DimensionRegistry;
use crate::embedding::{Space, DEFAULT_MIN_ANCHORS, STYLE_DIM};
use crate::explainer::{DEFAULT_DIFFERENT_STYLE, DEFAULT_SAME_CONTENT};
use crate::providers::http::{Endpoint, HttpChatProvider, HttpEmbeddingProvider};
use crate::providers::limit::DEFAULT_CONCURRENCY_LIMIT;
use crate::providers::mock::{LexicalContentEmbedder, MarkerStyleEmbedder};
use crate::providers::scripted::ScriptedChat;
use crate::providers::{ChatProvider, EmbeddingProvider};
use crate::rewriter::{DEFAULT_CONTENT_GATE, DEFAULT_K, MAX_K};

pub const CONTENT_DIM: usize = 384;
pub const ENV_PREFIX: &str = "WD_";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("no chat provider configured")]
    MissingChatProvider,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Minimum content similarity a rewrite must keep.
    pub content_gate: f64,
    pub same_content: f64,
    pub different_style: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            content_gate: DEFAULT_CONTENT_GATE,
            same_content: DEFAULT_SAME_CONTENT,
            different_style: DEFAULT_DIFFERENT_STYLE,
        }
    }
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_max_input_chars() -> usize {
    24_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ChatProviderConfig {
    /// OpenAI-compatible chat completions endpoint.
    Http {
        endpoint: String,
        model_id: String,
        #[serde(default)]
        auth_token_env: Option<String>,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default = "default_max_input_chars")]
        max_input_chars: usize,
    },
    /// Replays a recorded transcript file.
    Scripted { transcript: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EmbeddingProviderConfig {
    /// OpenAI-compatible embeddings endpoint.
    Http {
        endpoint: String,
        model_id: String,
        #[serde(default)]
        auth_token_env: Option<String>,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        dim: usize,
    },
    /// Deterministic in-process embedder.
    Mock {
        #[serde(default)]
        dim: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProvidersConfig {
    pub chat: Option<ChatProviderConfig>,
    pub style: Option<EmbeddingProviderConfig>,
    pub content: Option<EmbeddingProviderConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub data_dir: PathBuf,
    /// Dimension registry file; the bundled default registry when unset.
    pub registry_path: Option<PathBuf>,
    /// Anchor phrase file; the bundled anchors when unset.
    pub anchors_path: Option<PathBuf>,
    pub axis_cache_path: Option<PathBuf>,
    pub k_default: usize,
    pub k_max: usize,
    pub retries: u32,
    pub concurrency_limit: usize,
    pub min_anchors: usize,
    pub thresholds: Thresholds,
    pub providers: ProvidersConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("wd-data"),
            registry_path: None,
            anchors_path: None,
            axis_cache_path: None,
            k_default: DEFAULT_K,
            k_max: MAX_K,
            retries: DEFAULT_RETRIES,
            concurrency_limit: DEFAULT_CONCURRENCY_LIMIT,
            min_anchors: DEFAULT_MIN_ANCHORS,
            thresholds: Thresholds::default(),
            providers: ProvidersConfig::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn parse_env<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| invalid(format!("{key}={value:?} is not a valid value")))
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    /// Reads `path`, resolves relative paths against its directory, applies
    /// `WD_*` environment overrides and validates the result.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), reason: e.to_string() })?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.apply_env(std::env::vars())?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults plus environment overrides, for runs without a file.
    pub fn from_env() -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_env(std::env::vars())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `WD_LISTEN`, `WD_DATA_DIR`, `WD_K_DEFAULT`, `WD_CONTENT_GATE`
    /// and friends. Unrelated variables are ignored.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
        for (key, value) in vars {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else { continue };
            match name {
                "LISTEN" => self.listen = value,
                "DATA_DIR" => self.data_dir = value.into(),
                "REGISTRY_PATH" => self.registry_path = Some(value.into()),
                "ANCHORS_PATH" => self.anchors_path = Some(value.into()),
                "AXIS_CACHE_PATH" => self.axis_cache_path = Some(value.into()),
                "K_DEFAULT" => self.k_default = parse_env(&key, &value)?,
                "K_MAX" => self.k_max = parse_env(&key, &value)?,
                "RETRIES" => self.retries = parse_env(&key, &value)?,
                "CONCURRENCY_LIMIT" => self.concurrency_limit = parse_env(&key, &value)?,
                "MIN_ANCHORS" => self.min_anchors = parse_env(&key, &value)?,
                "CONTENT_GATE" => self.thresholds.content_gate = parse_env(&key, &value)?,
                "SAME_CONTENT" => self.thresholds.same_content = parse_env(&key, &value)?,
                "DIFFERENT_STYLE" => self.thresholds.different_style = parse_env(&key, &value)?,
                "CHAT_TRANSCRIPT" => {
                    self.providers.chat = Some(ChatProviderConfig::Scripted { transcript: value.into() })
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_dir);
        for p in [&mut self.registry_path, &mut self.anchors_path, &mut self.axis_cache_path].into_iter().flatten() {
            fix(p);
        }
        if let Some(ChatProviderConfig::Scripted { transcript }) = &mut self.providers.chat {
            fix(transcript);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.listen_addr()?;
        if !(1..=MAX_K).contains(&self.k_max) {
            return Err(invalid(format!("k_max must be in 1..={MAX_K}")));
        }
        if !(1..=self.k_max).contains(&self.k_default) {
            return Err(invalid("k_default must be in 1..=k_max"));
        }
        if self.retries > 10 {
            return Err(invalid("retries must be at most 10"));
        }
        if self.concurrency_limit == 0 {
            return Err(invalid("concurrency_limit must be positive"));
        }
        if self.min_anchors == 0 {
            return Err(invalid("min_anchors must be positive"));
        }
        let t = &self.thresholds;
        if !(0.0..=1.0).contains(&t.content_gate) {
            return Err(invalid("thresholds.content_gate must be in [0, 1]"));
        }
        for (name, v) in [("same_content", t.same_content), ("different_style", t.different_style)] {
            if !(0.0..=2.0).contains(&v) {
                return Err(invalid(format!("thresholds.{name} must be in [0, 2]")));
            }
        }
        for (name, p) in [("style", &self.providers.style), ("content", &self.providers.content)] {
            match p {
                Some(EmbeddingProviderConfig::Http { dim: 0, .. }) | Some(EmbeddingProviderConfig::Mock { dim: Some(0) }) => {
                    return Err(invalid(format!("providers.{name}.dim must be positive")))
                }
                Some(EmbeddingProviderConfig::Mock { dim: Some(d) }) if name == "style" && *d < 6 => {
                    return Err(invalid("providers.style.dim must be at least 6 for the mock embedder"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn listen_addr(&self) -> Result<SocketAddr, ConfigError> {
        self.listen.parse().map_err(|_| invalid(format!("listen address `{}` is not host:port", self.listen)))
    }

    pub fn registry(&self) -> Result<DimensionRegistry, ConfigError> {
        let text = match &self.registry_path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| ConfigError::Read { path: p.display().to_string(), reason: e.to_string() })?,
            None => DEFAULT_REGISTRY.to_string(),
        };
        DimensionRegistry::from_toml(&text).map_err(|e| invalid(format!("registry: {e}")))
    }

    pub fn anchors(&self) -> Result<AnchorSet, ConfigError> {
        match &self.anchors_path {
            Some(p) => AnchorSet::load(p).map_err(|e| invalid(e.to_string())),
            None => Ok(AnchorSet::builtin()),
        }
    }

    pub fn chat_provider(&self) -> Result<Option<Arc<dyn ChatProvider>>, ConfigError> {
        Ok(match &self.providers.chat {
            None => None,
            Some(ChatProviderConfig::Http { endpoint, model_id, auth_token_env, timeout_ms, max_input_chars }) => {
                let ep = Endpoint {
                    url: endpoint.clone(),
                    model_id: model_id.clone(),
                    auth_token_env: auth_token_env.clone(),
                    timeout_ms: *timeout_ms,
                };
                Some(Arc::new(HttpChatProvider::new(ep, *max_input_chars)))
            }
            Some(ChatProviderConfig::Scripted { transcript }) => {
                Some(Arc::new(ScriptedChat::from_file(transcript).map_err(invalid)?))
            }
        })
    }

    pub fn style_provider(&self) -> Arc<dyn EmbeddingProvider> {
        embedding_provider(self.providers.style.as_ref(), Space::Style)
    }

    pub fn content_provider(&self) -> Arc<dyn EmbeddingProvider> {
        embedding_provider(self.providers.content.as_ref(), Space::Content)
    }
}

fn embedding_provider(cfg: Option<&EmbeddingProviderConfig>, space: Space) -> Arc<dyn EmbeddingProvider> {
    let default_dim = match space {
        Space::Style => STYLE_DIM,
        Space::Content => CONTENT_DIM,
    };
    match cfg {
        Some(EmbeddingProviderConfig::Http { endpoint, model_id, auth_token_env, timeout_ms, dim }) => {
            let ep = Endpoint {
                url: endpoint.clone(),
                model_id: model_id.clone(),
                auth_token_env: auth_token_env.clone(),
                timeout_ms: *timeout_ms,
            };
            Arc::new(HttpEmbeddingProvider::new(ep, space, *dim))
        }
        Some(EmbeddingProviderConfig::Mock { dim }) => mock_embedder(space, dim.unwrap_or(default_dim)),
        None => mock_embedder(space, default_dim),
    }
}

fn mock_embedder(space: Space, dim: usize) -> Arc<dyn EmbeddingProvider> {
    match space {
        Space::Style => Arc::new(MarkerStyleEmbedder::new(dim)),
        Space::Content => Arc::new(LexicalContentEmbedder::new(dim)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = ServiceConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.k_default, 3);
        assert_eq!(cfg.thresholds.content_gate, 0.8);
        assert_eq!(cfg.registry().unwrap().len(), 5);
    }

    #[test]
    fn parses_providers_and_thresholds() {
        let cfg = ServiceConfig::from_toml(
            r#"
            listen = "127.0.0.1:0"
            k_default = 4
            [thresholds]
            content_gate = 0.75
            [providers.chat]
            kind = "http"
            endpoint = "http://localhost:9/v1/chat/completions"
            model_id = "some-model"
            auth_token_env = "WD_TOKEN"
            [providers.style]
            kind = "mock"
            dim = 16
            "#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.k_default, 4);
        assert_eq!(cfg.thresholds.content_gate, 0.75);
        assert_eq!(cfg.thresholds.same_content, 0.2);
        assert!(matches!(cfg.providers.chat, Some(ChatProviderConfig::Http { timeout_ms: 30_000, .. })));
        assert_eq!(cfg.style_provider().info().dim, 16);
        assert_eq!(cfg.content_provider().info().dim, CONTENT_DIM);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ServiceConfig::from_toml("lissten = \"x\"").is_err());
    }

    #[test]
    fn env_overrides() {
        let mut cfg = ServiceConfig::default();
        cfg.apply_env([
            ("WD_K_DEFAULT".to_string(), "5".to_string()),
            ("WD_CONTENT_GATE".to_string(), "0.9".to_string()),
            ("HOME".to_string(), "/x".to_string()),
        ])
        .unwrap();
        assert_eq!(cfg.k_default, 5);
        assert_eq!(cfg.thresholds.content_gate, 0.9);
        assert!(cfg.apply_env([("WD_RETRIES".to_string(), "many".to_string())]).is_err());
    }

    #[test]
    fn range_checks() {
        let mut cfg = ServiceConfig { k_default: 9, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg.k_default = 3;
        cfg.thresholds.different_style = 2.5;
        assert!(cfg.validate().is_err());
        cfg.thresholds.different_style = 0.5;
        cfg.listen = "nowhere".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wd.toml");
        std::fs::write(&path, "data_dir = \"state\"\n[providers.chat]\nkind = \"scripted\"\ntranscript = \"t.json\"\n")
            .unwrap();
        let cfg = ServiceConfig::load(&path).unwrap();
        assert_eq!(cfg.data_dir, dir.path().join("state"));
        assert!(matches!(&cfg.providers.chat, Some(ChatProviderConfig::Scripted { transcript }) if transcript == &dir.path().join("t.json")));
    }
}
