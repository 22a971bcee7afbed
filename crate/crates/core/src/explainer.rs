//! Stage three: how parallel suggestions differ from the draft and from one
//! another, in content space and in style space.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{round_half_up_1dp, DimensionRegistry, IntentionProfile, RewriteSuggestion};
use crate::embedding::{cosine_distance, EmbeddingError, Vector};
use crate::providers::{EmbeddingProvider, ProviderError};

pub const DEFAULT_SAME_CONTENT: f64 = 0.2;
pub const DEFAULT_DIFFERENT_STYLE: f64 = 0.5;

pub const ZERO_DELTA_NOTE: &str = "Matches your draft's tone on all detected dimensions";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExplainError {
    #[error("no suggestions to explain")]
    EmptyInput,
    #[error("suggestion has no score for dimension `{0}`")]
    MissingDimension(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// Cut-offs used to label a pair of suggestions in the report summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuanceThresholds {
    /// Content distance below which two texts say the same thing.
    pub same_content: f64,
    /// Style distance above which two texts read differently.
    pub different_style: f64,
}

impl Default for NuanceThresholds {
    fn default() -> Self {
        Self { same_content: DEFAULT_SAME_CONTENT, different_style: DEFAULT_DIFFERENT_STYLE }
    }
}

/// Symmetric matrix with a zero diagonal, serialized as nested row arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DistanceMatrix(Vec<Vec<f64>>);

impl DistanceMatrix {
    /// Cosine distances between all pairs. Only the upper triangle is
    /// computed; the lower one is mirrored so symmetry is exact.
    pub fn from_vectors(vs: &[Vector]) -> Result<Self, EmbeddingError> {
        let n = vs.len();
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = cosine_distance(&vs[i], &vs[j])?;
                rows[i][j] = d;
                rows[j][i] = d;
            }
        }
        Ok(Self(rows))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.0
    }

    /// Index pair `i < j` with the largest entry; ties go to the
    /// lexicographically smallest pair. `None` below two rows.
    pub fn argmax_pair(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize)> = None;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                if best.is_none_or(|(bi, bj)| self.get(i, j) > self.get(bi, bj)) {
                    best = Some((i, j));
                }
            }
        }
        best
    }

    /// Row index nearest to `i` (excluding `i`), lowest index on ties.
    pub fn nearest(&self, i: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        for j in (0..self.len()).filter(|&j| j != i) {
            if best.is_none_or(|b| self.get(i, j) < self.get(i, b)) {
                best = Some(j);
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionDelta {
    pub dimension_id: String,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionNuance {
    pub rank: u32,
    pub deltas: Vec<DimensionDelta>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub ranks: (u32, u32),
    pub style_distance: f64,
    pub content_distance: f64,
    pub same_content: bool,
    pub different_style: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuanceReport {
    pub suggestion_count: usize,
    pub style_distance: DistanceMatrix,
    pub content_distance: DistanceMatrix,
    pub per_suggestion: Vec<SuggestionNuance>,
    pub divergent_pair: Option<(u32, u32)>,
    pub pairs: Vec<PairSummary>,
    pub thresholds: NuanceThresholds,
}

/// Style and content distance matrices over the suggestion texts, one
/// embedding batch per space.
pub fn pairwise_matrices(
    suggestions: &[RewriteSuggestion],
    content: &dyn EmbeddingProvider,
    style: &dyn EmbeddingProvider,
) -> Result<(DistanceMatrix, DistanceMatrix), ExplainError> {
    if suggestions.is_empty() {
        return Err(ExplainError::EmptyInput);
    }
    let texts: Vec<String> = suggestions.iter().map(|s| s.text.clone()).collect();
    let style_vecs = style.embed(&texts)?;
    let content_vecs = content.embed(&texts)?;
    if style_vecs.len() != texts.len() || content_vecs.len() != texts.len() {
        return Err(ProviderError::Protocol("embedding batch size mismatch".into()).into());
    }
    Ok((DistanceMatrix::from_vectors(&style_vecs)?, DistanceMatrix::from_vectors(&content_vecs)?))
}

/// `measured - baseline` per baseline dimension, in baseline order.
pub fn dimension_deltas(
    suggestion: &RewriteSuggestion,
    baseline: &IntentionProfile,
) -> Result<Vec<DimensionDelta>, ExplainError> {
    baseline
        .entries()
        .iter()
        .map(|e| {
            let measured = suggestion
                .measured_profile
                .get(&e.dimension_id)
                .ok_or_else(|| ExplainError::MissingDimension(e.dimension_id.clone()))?;
            Ok(DimensionDelta { dimension_id: e.dimension_id.clone(), delta: measured.value() - e.score.value() })
        })
        .collect()
}

fn pole_word(registry: &DimensionRegistry, dimension_id: &str, delta: f64) -> String {
    match registry.get(dimension_id) {
        Some(d) => d.pole_toward(delta).to_string(),
        None if delta > 0.0 => format!("toward the high end of {dimension_id}"),
        None => format!("toward the low end of {dimension_id}"),
    }
}

/// Templated note, e.g. `More informal (Δ=+2.0), more close (Δ=+2.0) than
/// your draft; closest alternative: #2`. Deltas that round to zero at one
/// decimal are left out.
pub fn note_for(deltas: &[DimensionDelta], registry: &DimensionRegistry, closest: Option<u32>) -> String {
    let clauses: Vec<String> = deltas
        .iter()
        .filter_map(|d| {
            let shown = round_half_up_1dp(d.delta);
            (shown != 0.0).then(|| format!("more {} (Δ={shown:+.1})", pole_word(registry, &d.dimension_id, shown)))
        })
        .collect();
    if clauses.is_empty() {
        return ZERO_DELTA_NOTE.to_string();
    }
    let mut note = clauses.join(", ");
    note.replace_range(..1, "M");
    note.push_str(" than your draft");
    if let Some(rank) = closest {
        note.push_str(&format!("; closest alternative: #{rank}"));
    }
    note
}

/// Assembles the report from already-fetched embeddings. Pure: the same
/// inputs always give the same report.
pub fn build_report(
    suggestions: &[RewriteSuggestion],
    baseline: &IntentionProfile,
    style_distance: DistanceMatrix,
    content_distance: DistanceMatrix,
    registry: &DimensionRegistry,
    thresholds: NuanceThresholds,
) -> Result<NuanceReport, ExplainError> {
    let n = suggestions.len();
    if n == 0 {
        return Err(ExplainError::EmptyInput);
    }
    let per_suggestion = suggestions
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let deltas = dimension_deltas(s, baseline)?;
            let closest = style_distance.nearest(i).map(|j| suggestions[j].rank);
            let note = note_for(&deltas, registry, closest);
            Ok(SuggestionNuance { rank: s.rank, deltas, note })
        })
        .collect::<Result<Vec<_>, ExplainError>>()?;
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let style = style_distance.get(i, j);
            let content = content_distance.get(i, j);
            pairs.push(PairSummary {
                ranks: (suggestions[i].rank, suggestions[j].rank),
                style_distance: style,
                content_distance: content,
                same_content: content < thresholds.same_content,
                different_style: style > thresholds.different_style,
            });
        }
    }
    let divergent_pair = style_distance.argmax_pair().map(|(i, j)| (suggestions[i].rank, suggestions[j].rank));
    Ok(NuanceReport {
        suggestion_count: n,
        style_distance,
        content_distance,
        per_suggestion,
        divergent_pair,
        pairs,
        thresholds,
    })
}

pub fn explain(
    suggestions: &[RewriteSuggestion],
    baseline: &IntentionProfile,
    content: &dyn EmbeddingProvider,
    style: &dyn EmbeddingProvider,
    registry: &DimensionRegistry,
    thresholds: NuanceThresholds,
) -> Result<NuanceReport, ExplainError> {
    let (style_m, content_m) = pairwise_matrices(suggestions, content, style)?;
    build_report(suggestions, baseline, style_m, content_m, registry, thresholds)
}
