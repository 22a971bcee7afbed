//! Stage one: which dimensions does a draft convey, and how strongly.
//!
//! The chat model picks the dominant dimensions from the registry (its order
//! is kept as the dominance order); the style embedding then scores each
//! one on its calibrated axis.

use std::collections::HashSet;

use serde::Deserialize;
use thiserror::Error;

use crate::domain::{Draft, DimensionRegistry, IntentionProfile, ProfileEntry, ProfileSource};
use crate::embedding::{axis_score, AxisSet, EmbeddingError, Vector};
use crate::providers::{complete_structured, ChatProvider, EmbeddingProvider, PayloadSchema, ProviderError, StructuredError};
use crate::templates::{render, TemplateError, DETECT_TEMPLATE};

pub const DEFAULT_RETRIES: u32 = 2;

pub const DETECTION_SCHEMA: PayloadSchema = PayloadSchema {
    name: "detection",
    shape: r#"{"dimensions": [{"id": "<dimension id>", "rationale": "<one short sentence>"}]}"#,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectError {
    #[error("invalid detection request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Structured(#[from] StructuredError),
    #[error("the model reported no dominant dimensions")]
    NoDimensionsDetected,
    #[error("no calibrated axis for dimension `{0}`")]
    MissingAxis(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

#[derive(Debug, Clone)]
pub struct DetectionRequest<'a> {
    pub draft: &'a Draft,
    pub registry: &'a DimensionRegistry,
    pub max_dims: usize,
}

impl<'a> DetectionRequest<'a> {
    pub fn new(draft: &'a Draft, registry: &'a DimensionRegistry, max_dims: usize) -> Result<Self, DetectError> {
        if max_dims == 0 || max_dims > registry.max_detected() {
            return Err(DetectError::InvalidRequest(format!(
                "max_dims must be in 1..={}, got {max_dims}",
                registry.max_detected()
            )));
        }
        Ok(Self { draft, registry, max_dims })
    }

    /// Request for as many dimensions as the registry allows.
    pub fn full(draft: &'a Draft, registry: &'a DimensionRegistry) -> Self {
        Self { draft, registry, max_dims: registry.max_detected() }
    }
}

#[derive(Debug, Deserialize)]
struct DetectionPayload {
    dimensions: Vec<DetectedDimension>,
}

#[derive(Debug, Deserialize)]
struct DetectedDimension {
    id: String,
    #[serde(default)]
    #[allow(dead_code)]
    rationale: String,
}

pub fn detection_prompt(req: &DetectionRequest<'_>) -> Result<String, TemplateError> {
    let lines = req
        .registry
        .dimensions()
        .iter()
        .map(|d| format!("- {}: 1 = {}, 7 = {}. {}", d.id(), d.negative_pole(), d.positive_pole(), d.description()))
        .collect::<Vec<_>>()
        .join("\n");
    let max_dims = req.max_dims.to_string();
    render(
        DETECT_TEMPLATE,
        &[("max_dims", &max_dims), ("dimension_lines", &lines), ("draft", &req.draft.plain_text())],
    )
}

/// Asks the model for the dominant dimensions, keeping its order.
///
/// Unregistered ids are dropped and duplicates collapsed. A reply with only
/// unregistered ids counts as malformed and is re-prompted; an empty list
/// is taken at face value.
pub fn detect_dimensions(
    req: &DetectionRequest<'_>,
    llm: &dyn ChatProvider,
    retries: u32,
) -> Result<Vec<String>, DetectError> {
    let prompt = detection_prompt(req)?;
    let ids = complete_structured(llm, &prompt, &DETECTION_SCHEMA, retries, |payload: DetectionPayload| {
        if payload.dimensions.is_empty() {
            return Ok(Vec::new());
        }
        let mut seen = HashSet::new();
        let kept: Vec<String> = payload
            .dimensions
            .iter()
            .filter(|d| req.registry.contains(&d.id))
            .filter(|d| seen.insert(d.id.clone()))
            .map(|d| d.id.clone())
            .take(req.max_dims)
            .collect();
        if kept.is_empty() {
            let got: Vec<&str> = payload.dimensions.iter().map(|d| d.id.as_str()).collect();
            let allowed: Vec<&str> = req.registry.ids().collect();
            return Err(format!("none of the ids {got:?} are allowed; use only {allowed:?}"));
        }
        Ok(kept)
    })?;
    if ids.is_empty() {
        return Err(DetectError::NoDimensionsDetected);
    }
    Ok(ids)
}

/// Scores one style vector on each of `dims`, in the given order.
pub fn score_vector(v: &Vector, dims: &[String], axes: &AxisSet) -> Result<IntentionProfile, DetectError> {
    if dims.is_empty() {
        return Err(DetectError::NoDimensionsDetected);
    }
    let entries = dims
        .iter()
        .map(|id| {
            let axis = axes.get(id).ok_or_else(|| DetectError::MissingAxis(id.clone()))?;
            Ok(ProfileEntry { dimension_id: id.clone(), score: axis_score(axis, v)? })
        })
        .collect::<Result<Vec<_>, DetectError>>()?;
    IntentionProfile::new(entries, ProfileSource::Measured)
        .map_err(|e| DetectError::InvalidRequest(e.to_string()))
}

/// Embeds `text` once in style space and scores it on every dimension.
pub fn quantify(
    text: &str,
    dims: &[String],
    style: &dyn EmbeddingProvider,
    axes: &AxisSet,
) -> Result<IntentionProfile, DetectError> {
    if text.trim().is_empty() {
        return Err(DetectError::InvalidRequest("text is empty".into()));
    }
    if let Some(missing) = dims.iter().find(|d| axes.get(d).is_none()) {
        return Err(DetectError::MissingAxis(missing.clone()));
    }
    let vector = style
        .embed(&[text.to_string()])?
        .pop()
        .ok_or_else(|| ProviderError::Protocol("style provider returned no vector".into()))?;
    score_vector(&vector, dims, axes)
}

pub fn analyze(
    req: &DetectionRequest<'_>,
    llm: &dyn ChatProvider,
    style: &dyn EmbeddingProvider,
    axes: &AxisSet,
    retries: u32,
) -> Result<IntentionProfile, DetectError> {
    let dims = detect_dimensions(req, llm, retries)?;
    quantify(&req.draft.plain_text(), &dims, style, axes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Granularity;
    use crate::embedding::{StyleAxis, Vector};
    use crate::providers::mock::MarkerStyleEmbedder;
    use crate::providers::scripted::{ScriptedChat, TranscriptTurn};

    fn reply(ids: &[&str]) -> String {
        let dims: Vec<_> = ids.iter().map(|id| serde_json::json!({"id": id, "rationale": "r"})).collect();
        serde_json::json!({ "dimensions": dims }).to_string()
    }

    fn draft() -> Draft {
        Draft::new("Dear Professor Miller, I hope you are well.", Granularity::Paragraph).unwrap()
    }

    #[test]
    fn keeps_model_order() {
        let reg = DimensionRegistry::default();
        let d = draft();
        let req = DetectionRequest::full(&d, &reg);
        let chat = ScriptedChat::new(vec![TranscriptTurn::expecting(
            &["formal-informal", "shy-bold", "Dear Professor Miller"],
            reply(&["respectful-disrespectful", "formal-informal", "distant-close", "shy-bold"]),
        )]);
        let ids = detect_dimensions(&req, &chat, 2).unwrap();
        assert_eq!(ids, ["respectful-disrespectful", "formal-informal", "distant-close", "shy-bold"]);
    }

    #[test]
    fn collapses_duplicates_and_drops_unknown() {
        let reg = DimensionRegistry::default();
        let d = draft();
        let req = DetectionRequest::full(&d, &reg);
        let chat = ScriptedChat::from_replies([reply(&["formal-informal", "made-up", "formal-informal"])]);
        assert_eq!(detect_dimensions(&req, &chat, 2).unwrap(), ["formal-informal"]);
    }

    #[test]
    fn all_unknown_exhausts_retries() {
        let reg = DimensionRegistry::default();
        let d = draft();
        let req = DetectionRequest::full(&d, &reg);
        let chat = ScriptedChat::new(vec![
            TranscriptTurn::reply(reply(&["made-up-dim"])),
            TranscriptTurn::expecting(&["previous reply was rejected", "made-up-dim"], reply(&["made-up-dim"])),
            TranscriptTurn::expecting(&["previous reply was rejected"], reply(&["made-up-dim"])),
        ]);
        let err = detect_dimensions(&req, &chat, 2).unwrap_err();
        assert!(matches!(err, DetectError::Structured(StructuredError::MalformedModelOutput { attempts: 3, .. })));
        assert_eq!(chat.calls(), 3);
    }

    #[test]
    fn empty_reply_means_nothing_detected() {
        let reg = DimensionRegistry::default();
        let d = draft();
        let req = DetectionRequest::full(&d, &reg);
        let chat = ScriptedChat::from_replies([reply(&[])]);
        assert_eq!(detect_dimensions(&req, &chat, 2).unwrap_err(), DetectError::NoDimensionsDetected);
        assert_eq!(chat.calls(), 1);
    }

    #[test]
    fn max_dims_truncates_and_is_bounded() {
        let reg = DimensionRegistry::default();
        let d = draft();
        assert!(DetectionRequest::new(&d, &reg, 0).is_err());
        assert!(DetectionRequest::new(&d, &reg, 6).is_err());
        let req = DetectionRequest::new(&d, &reg, 2).unwrap();
        let chat = ScriptedChat::from_replies([reply(&["shy-bold", "formal-informal", "distant-close"])]);
        assert_eq!(detect_dimensions(&req, &chat, 0).unwrap(), ["shy-bold", "formal-informal"]);
    }

    fn toy_axis(id: &str, direction: [f64; 2], center: [f64; 2], radius: f64) -> StyleAxis {
        StyleAxis::from_parts(
            id,
            Vector::style(direction.to_vec()).unwrap(),
            Vector::style(center.to_vec()).unwrap(),
            radius,
            (3, 3),
        )
        .unwrap()
    }

    #[test]
    fn toy_space_projection_scores() {
        let axes: AxisSet = [toy_axis("formal-informal", [1.0, 0.0], [0.0, 0.0], 2.0)].into_iter().collect();
        let profile = score_vector(&Vector::style(vec![1.0, 0.0]).unwrap(), &["formal-informal".into()], &axes).unwrap();
        assert_eq!(profile.get("formal-informal").unwrap().value(), 5.5);
        let center = score_vector(&Vector::style(vec![0.0, 3.0]).unwrap(), &["formal-informal".into()], &axes).unwrap();
        assert_eq!(center.get("formal-informal").unwrap().value(), 4.0);
    }

    #[test]
    fn missing_axis_is_reported_before_embedding() {
        let style = MarkerStyleEmbedder::new(8);
        let err = quantify("hello", &["formal-informal".into()], &style, &AxisSet::new()).unwrap_err();
        assert_eq!(err, DetectError::MissingAxis("formal-informal".into()));
    }
}
