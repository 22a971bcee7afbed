//! Anchor phrase sets, axis calibration and the on-disk axis cache.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::DimensionRegistry;
use crate::embedding::{axis_score, build_axis, mean_vector, AxisSet, EmbeddingError, Vector};
use crate::providers::{EmbeddingProvider, ProviderError};

pub const DEFAULT_ANCHORS: &str = include_str!("../config/anchors.toml");
pub const DEFAULT_REGISTRY: &str = include_str!("../config/dimensions.toml");

#[derive(Debug, Error)]
pub enum AnchorError {
    #[error("cannot parse anchors: {0}")]
    Parse(String),
    #[error("no anchor phrases for dimension `{0}`")]
    MissingAnchors(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("axis cache: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorPoles {
    pub negative: Vec<String>,
    pub positive: Vec<String>,
}

/// Anchor phrases keyed by dimension id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnchorSet(BTreeMap<String, AnchorPoles>);

impl AnchorSet {
    pub fn from_toml(text: &str) -> Result<Self, AnchorError> {
        toml::from_str(text).map_err(|e| AnchorError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, AnchorError> {
        let text = std::fs::read_to_string(path).map_err(|e| AnchorError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn builtin() -> Self {
        Self::from_toml(DEFAULT_ANCHORS).expect("bundled anchors parse")
    }

    pub fn get(&self, dimension_id: &str) -> Option<&AnchorPoles> {
        self.0.get(dimension_id)
    }

    pub fn insert(&mut self, dimension_id: impl Into<String>, poles: AnchorPoles) {
        self.0.insert(dimension_id.into(), poles);
    }

    /// Same phrases with the poles exchanged on every dimension.
    pub fn swapped(&self) -> Self {
        Self(
            self.0
                .iter()
                .map(|(id, p)| (id.clone(), AnchorPoles { negative: p.positive.clone(), positive: p.negative.clone() }))
                .collect(),
        )
    }
}

/// Per-dimension calibration self-test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisCheck {
    pub dimension_id: String,
    pub radius: f64,
    pub positive_anchors: usize,
    pub negative_anchors: usize,
    pub positive_mean_score: f64,
    pub negative_mean_score: f64,
    pub midpoint_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub model_id: String,
    pub dimensions: Vec<AxisCheck>,
}

/// Builds one axis per registry dimension. All anchor phrases are embedded
/// in a single batch.
pub fn calibrate(
    anchors: &AnchorSet,
    registry: &DimensionRegistry,
    style: &dyn EmbeddingProvider,
    min_anchors: usize,
) -> Result<(AxisSet, CalibrationReport), AnchorError> {
    let mut texts = Vec::new();
    let mut spans = Vec::new();
    for dim in registry.dimensions() {
        let poles = anchors.get(dim.id()).ok_or_else(|| AnchorError::MissingAnchors(dim.id().to_string()))?;
        let start = texts.len();
        texts.extend(poles.positive.iter().cloned());
        let mid = texts.len();
        texts.extend(poles.negative.iter().cloned());
        spans.push((dim.id(), start, mid, texts.len()));
    }
    let vectors = style.embed(&texts)?;
    if vectors.len() != texts.len() {
        return Err(ProviderError::Protocol(format!("asked for {} vectors, got {}", texts.len(), vectors.len())).into());
    }

    let mut axes = AxisSet::new();
    let mut checks = Vec::new();
    for (id, start, mid, end) in spans {
        let pos = &vectors[start..mid];
        let neg = &vectors[mid..end];
        let axis = build_axis(id, pos, neg, min_anchors)?;
        let p = mean_vector(pos)?;
        let n = mean_vector(neg)?;
        checks.push(AxisCheck {
            dimension_id: id.to_string(),
            radius: axis.radius(),
            positive_anchors: pos.len(),
            negative_anchors: neg.len(),
            positive_mean_score: axis_score(&axis, &p)?.value(),
            negative_mean_score: axis_score(&axis, &n)?.value(),
            midpoint_score: axis_score(&axis, axis.center())?.value(),
        });
        axes.insert(axis);
    }
    Ok((axes, CalibrationReport { model_id: style.info().model_id.clone(), dimensions: checks }))
}

/// Axes as stored on disk, tagged with the style model they were built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisCache {
    pub model_id: String,
    pub axes: AxisSet,
}

impl AxisCache {
    pub fn load(path: &Path) -> Result<Self, AnchorError> {
        let text = std::fs::read_to_string(path).map_err(|e| AnchorError::Cache(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| AnchorError::Cache(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), AnchorError> {
        let text = serde_json::to_string(self).map_err(|e| AnchorError::Cache(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| AnchorError::Cache(format!("{}: {e}", path.display())))
    }
}

/// Reuses cached axes when they were built by the same style model and
/// cover the registry; otherwise calibrates and, if a path is given,
/// rewrites the cache.
pub fn load_or_calibrate(
    cache_path: Option<&Path>,
    anchors: &AnchorSet,
    registry: &DimensionRegistry,
    style: &dyn EmbeddingProvider,
    min_anchors: usize,
) -> Result<AxisSet, AnchorError> {
    let model_id = &style.info().model_id;
    if let Some(path) = cache_path.filter(|p| p.exists()) {
        match AxisCache::load(path) {
            Ok(cache) if &cache.model_id == model_id && registry.ids().all(|id| cache.axes.get(id).is_some()) => {
                return Ok(cache.axes);
            }
            Ok(_) => tracing::info!(path = %path.display(), "axis cache is stale, recalibrating"),
            Err(e) => tracing::warn!(error = %e, "ignoring unreadable axis cache"),
        }
    }
    let (axes, _) = calibrate(anchors, registry, style, min_anchors)?;
    if let Some(path) = cache_path {
        AxisCache { model_id: model_id.clone(), axes: axes.clone() }.save(path)?;
    }
    Ok(axes)
}

/// Style vectors for the anchor phrases of one pole. Handy for tests that
/// need the pole mean directly.
pub fn pole_vectors(
    anchors: &AnchorSet,
    dimension_id: &str,
    positive: bool,
    style: &dyn EmbeddingProvider,
) -> Result<Vec<Vector>, AnchorError> {
    let poles = anchors.get(dimension_id).ok_or_else(|| AnchorError::MissingAnchors(dimension_id.to_string()))?;
    let texts = if positive { &poles.positive } else { &poles.negative };
    Ok(style.embed(texts)?)
}
