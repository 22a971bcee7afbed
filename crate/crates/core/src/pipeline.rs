//! The three stages wired to concrete providers, shared by the service and
//! the CLI.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::anchors::load_or_calibrate;
use crate::config::{ConfigError, ServiceConfig};
use crate::detector::{self, DetectionRequest};
use crate::domain::{DimensionRegistry, Draft, Granularity, IntentionProfile, RewriteSuggestion};
use crate::embedding::AxisSet;
use crate::error::{Error, Result};
use crate::explainer::{self, NuanceReport, NuanceThresholds};
use crate::providers::{
    CachedEmbedder, CallMeter, ChatProvider, EmbeddingCache, EmbeddingProvider, EvictionPolicy, InFlightLimiter,
    Limited, Metered, Reachability,
};
use crate::rewriter::{
    build_targets_from_adjustment, generate_candidates, infer_targets_from_native, rank_suggestions,
    validate_candidates, Adjustment, Diversity, RejectedCandidate, RewriteRequest, TargetProfile,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub k_default: usize,
    pub k_max: usize,
    pub retries: u32,
    pub content_gate: f64,
    pub nuance: NuanceThresholds,
}

impl Settings {
    pub fn from_config(cfg: &ServiceConfig) -> Self {
        Self {
            k_default: cfg.k_default,
            k_max: cfg.k_max,
            retries: cfg.retries,
            content_gate: cfg.thresholds.content_gate,
            nuance: NuanceThresholds {
                same_content: cfg.thresholds.same_content,
                different_style: cfg.thresholds.different_style,
            },
        }
    }
}

impl Default for Settings {
    fn default() -> Self {
        Self::from_config(&ServiceConfig::default())
    }
}

/// How rewrite targets are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Adjust(Vec<Adjustment>),
    Native,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriteOutcome {
    pub targets: TargetProfile,
    pub suggestions: Vec<RewriteSuggestion>,
    pub rejected: Vec<RejectedCandidate>,
}

/// Providers as seen by one request: optionally metered, behind the shared
/// limiter and embedding caches.
pub struct RequestProviders {
    pub chat: Option<Arc<dyn ChatProvider>>,
    pub content: CachedEmbedder,
    pub style: CachedEmbedder,
}

impl RequestProviders {
    fn chat(&self) -> Result<&dyn ChatProvider> {
        self.chat.as_deref().ok_or_else(|| ConfigError::MissingChatProvider.into())
    }
}

pub struct Pipeline {
    registry: DimensionRegistry,
    axes: AxisSet,
    chat: Option<Arc<dyn ChatProvider>>,
    content: Arc<dyn EmbeddingProvider>,
    style: Arc<dyn EmbeddingProvider>,
    content_cache: Arc<EmbeddingCache>,
    style_cache: Arc<EmbeddingCache>,
    settings: Settings,
}

impl Pipeline {
    /// Every provider call goes through one limiter allowing
    /// `concurrency_limit` calls at a time.
    pub fn new(
        registry: DimensionRegistry,
        axes: AxisSet,
        chat: Option<Arc<dyn ChatProvider>>,
        content: Arc<dyn EmbeddingProvider>,
        style: Arc<dyn EmbeddingProvider>,
        settings: Settings,
        concurrency_limit: usize,
    ) -> Self {
        let limiter = Arc::new(InFlightLimiter::new(concurrency_limit));
        let chat = chat.map(|c| Arc::new(Limited::new(c, limiter.clone())) as Arc<dyn ChatProvider>);
        let content: Arc<dyn EmbeddingProvider> = Arc::new(Limited::new(content, limiter.clone()));
        let style: Arc<dyn EmbeddingProvider> = Arc::new(Limited::new(style, limiter));
        Self {
            registry,
            axes,
            chat,
            content,
            style,
            content_cache: Arc::new(EmbeddingCache::new(EvictionPolicy::Fifo { capacity: 10_000 })),
            style_cache: Arc::new(EmbeddingCache::new(EvictionPolicy::Fifo { capacity: 10_000 })),
            settings,
        }
    }

    /// Builds providers from `cfg` and calibrates (or loads cached) axes.
    pub fn from_config(cfg: &ServiceConfig) -> Result<Self> {
        let registry = cfg.registry()?;
        let anchors = cfg.anchors()?;
        let style = cfg.style_provider();
        let content = cfg.content_provider();
        let chat = cfg.chat_provider()?;
        let axes = load_or_calibrate(cfg.axis_cache_path.as_deref(), &anchors, &registry, &style, cfg.min_anchors)?;
        Ok(Self::new(registry, axes, chat, content, style, Settings::from_config(cfg), cfg.concurrency_limit))
    }

    pub fn registry(&self) -> &DimensionRegistry {
        &self.registry
    }

    pub fn axes(&self) -> &AxisSet {
        &self.axes
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    /// Provider view for one request. With a meter, every call that
    /// reaches a provider (cache misses only, for embeddings) is counted.
    pub fn providers(&self, meter: Option<&Arc<CallMeter>>) -> RequestProviders {
        match meter {
            None => RequestProviders {
                chat: self.chat.clone(),
                content: CachedEmbedder::new(self.content.clone(), self.content_cache.clone()),
                style: CachedEmbedder::new(self.style.clone(), self.style_cache.clone()),
            },
            Some(m) => RequestProviders {
                chat: self.chat.clone().map(|c| Arc::new(Metered::new(c, m.clone())) as Arc<dyn ChatProvider>),
                content: CachedEmbedder::new(
                    Arc::new(Metered::new(self.content.clone(), m.clone())),
                    self.content_cache.clone(),
                ),
                style: CachedEmbedder::new(Arc::new(Metered::new(self.style.clone(), m.clone())), self.style_cache.clone()),
            },
        }
    }

    pub fn reachability(&self) -> Vec<(&'static str, Reachability)> {
        let mut out = Vec::new();
        match &self.chat {
            Some(c) => out.push(("chat", c.reachability())),
            None => out.push(("chat", Reachability { reachable: false, detail: "not configured".into() })),
        }
        out.push(("style", self.style.reachability()));
        out.push(("content", self.content.reachability()));
        out
    }

    pub fn analyze(&self, draft: &Draft, max_dims: Option<usize>, meter: Option<&Arc<CallMeter>>) -> Result<IntentionProfile> {
        let p = self.providers(meter);
        let req = match max_dims {
            Some(n) => DetectionRequest::new(draft, &self.registry, n)?,
            None => DetectionRequest::full(draft, &self.registry),
        };
        Ok(detector::analyze(&req, p.chat()?, &p.style, &self.axes, self.settings.retries)?)
    }

    pub fn targets(
        &self,
        draft: &Draft,
        baseline: &IntentionProfile,
        spec: &TargetSpec,
        meter: Option<&Arc<CallMeter>>,
    ) -> Result<TargetProfile> {
        match spec {
            TargetSpec::Adjust(adjustments) => Ok(build_targets_from_adjustment(baseline, adjustments)?),
            TargetSpec::Native => {
                let p = self.providers(meter);
                if draft.native_text().is_none() {
                    return Err(crate::rewriter::RewriteError::MissingNativeText.into());
                }
                Ok(infer_targets_from_native(draft, baseline, &self.registry, p.chat()?, self.settings.retries)?)
            }
        }
    }

    /// Generates, validates and ranks rewrites of `draft` toward `targets`.
    #[allow(clippy::too_many_arguments)]
    pub fn rewrite(
        &self,
        draft: &Draft,
        baseline: &IntentionProfile,
        targets: TargetProfile,
        granularity: Option<Granularity>,
        k: Option<usize>,
        diversity: Diversity,
        meter: Option<&Arc<CallMeter>>,
    ) -> Result<RewriteOutcome> {
        let k = k.unwrap_or(self.settings.k_default);
        if k == 0 || k > self.settings.k_max {
            return Err(Error::Invalid(format!("k must be in 1..={}, got {k}", self.settings.k_max)));
        }
        let draft = match granularity {
            Some(g) => draft.with_granularity(g),
            None => draft.clone(),
        };
        let req = RewriteRequest::new(draft, baseline.clone(), targets, k, diversity)?;
        let p = self.providers(meter);
        let candidates = generate_candidates(&req, &self.registry, p.chat()?, self.settings.retries)?;
        let validation = validate_candidates(
            &req.draft,
            &candidates,
            &req.targets,
            &p.content,
            &p.style,
            &self.axes,
            self.settings.content_gate,
        )?;
        let suggestions = rank_suggestions(validation.accepted)?;
        Ok(RewriteOutcome { targets: req.targets, suggestions, rejected: validation.rejected })
    }

    pub fn explain(
        &self,
        suggestions: &[RewriteSuggestion],
        baseline: &IntentionProfile,
        meter: Option<&Arc<CallMeter>>,
    ) -> Result<NuanceReport> {
        let p = self.providers(meter);
        Ok(explainer::explain(suggestions, baseline, &p.content, &p.style, &self.registry, self.settings.nuance)?)
    }
}
