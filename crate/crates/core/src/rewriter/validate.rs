use serde::{Deserialize, Serialize};

use super::{word_edit_pattern, RewriteError, TargetProfile};
use crate::detector::score_vector;
use crate::domain::{Draft, Granularity, IntentionProfile};
use crate::embedding::{content_preservation, AxisSet};
use crate::providers::{EmbeddingProvider, ProviderError};

pub const DEFAULT_CONTENT_GATE: f64 = 0.80;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RejectionReason {
    /// Content similarity to the draft fell below the gate.
    ContentDrift { similarity: f64, threshold: f64 },
    /// A word-level rewrite changed text outside the flagged spans.
    EditOutsideFlaggedSpan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedCandidate {
    pub text: String,
    pub reason: RejectionReason,
}

/// A candidate that passed validation, before ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub text: String,
    pub measured_profile: IntentionProfile,
    pub content_preservation: f64,
    pub alignment_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Validation {
    pub accepted: Vec<ScoredCandidate>,
    pub rejected: Vec<RejectedCandidate>,
}

/// Mean of `|measured - target|` over every target entry, locked ones
/// included.
pub fn alignment_error(measured: &IntentionProfile, targets: &TargetProfile) -> Result<f64, RewriteError> {
    let mut sum = 0.0;
    for t in targets.entries() {
        let m = measured.get(&t.dimension_id).ok_or_else(|| RewriteError::UnknownDimension(t.dimension_id.clone()))?;
        sum += (m.value() - t.target.value()).abs();
    }
    Ok(sum / targets.entries().len() as f64)
}

/// Scores candidates against the draft and the targets, discarding any
/// whose content similarity is below `content_gate`.
///
/// Content and style vectors are fetched in one batch per space; output
/// keeps candidate order.
pub fn validate_candidates(
    original: &Draft,
    candidates: &[String],
    targets: &TargetProfile,
    content: &dyn EmbeddingProvider,
    style: &dyn EmbeddingProvider,
    axes: &AxisSet,
    content_gate: f64,
) -> Result<Validation, RewriteError> {
    if candidates.is_empty() {
        return Err(RewriteError::NoCandidates);
    }
    let pattern = match original.granularity() {
        Granularity::Word => Some(word_edit_pattern(original.text()).map_err(RewriteError::InvalidRequest)?),
        _ => None,
    };

    let mut out = Validation::default();
    let mut in_bounds = Vec::new();
    for text in candidates {
        if pattern.as_ref().is_some_and(|re| !re.is_match(text)) {
            out.rejected.push(RejectedCandidate { text: text.clone(), reason: RejectionReason::EditOutsideFlaggedSpan });
        } else {
            in_bounds.push(text.clone());
        }
    }
    if in_bounds.is_empty() {
        return Err(RewriteError::AllCandidatesRejected(out.rejected));
    }

    let mut content_batch = Vec::with_capacity(in_bounds.len() + 1);
    content_batch.push(original.plain_text());
    content_batch.extend(in_bounds.iter().cloned());
    let content_vecs = content.embed(&content_batch)?;
    if content_vecs.len() != content_batch.len() {
        return Err(ProviderError::Protocol("content provider returned the wrong number of vectors".into()).into());
    }
    let (draft_vec, cand_vecs) = content_vecs.split_first().expect("batch is non-empty");

    let mut survivors = Vec::new();
    for (text, v) in in_bounds.iter().zip(cand_vecs) {
        let similarity = content_preservation(draft_vec, v)?;
        if similarity < content_gate {
            out.rejected.push(RejectedCandidate {
                text: text.clone(),
                reason: RejectionReason::ContentDrift { similarity, threshold: content_gate },
            });
        } else {
            survivors.push((text.clone(), similarity));
        }
    }
    if survivors.is_empty() {
        return Err(RewriteError::AllCandidatesRejected(out.rejected));
    }

    let texts: Vec<String> = survivors.iter().map(|(t, _)| t.clone()).collect();
    let style_vecs = style.embed(&texts)?;
    if style_vecs.len() != texts.len() {
        return Err(ProviderError::Protocol("style provider returned the wrong number of vectors".into()).into());
    }
    let dims = targets.dimension_ids();
    for ((text, similarity), v) in survivors.into_iter().zip(&style_vecs) {
        let measured_profile = score_vector(v, &dims, axes)?;
        let alignment_error = alignment_error(&measured_profile, targets)?;
        out.accepted.push(ScoredCandidate { text, measured_profile, content_preservation: similarity, alignment_error });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ProfileSource;
    use crate::embedding::{Space, StyleAxis, Vector};
    use crate::providers::mock::FixedEmbedder;
    use crate::rewriter::{build_targets_from_adjustment, Adjustment};

    fn axes() -> AxisSet {
        ["formal-informal", "distant-close"]
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let mut dir = vec![0.0; 3];
                dir[i] = 1.0;
                StyleAxis::from_parts(*id, Vector::style(dir).unwrap(), Vector::style(vec![0.0; 3]).unwrap(), 2.0, (3, 3))
                    .unwrap()
            })
            .collect()
    }

    fn baseline() -> IntentionProfile {
        IntentionProfile::from_pairs([("formal-informal", 4.0), ("distant-close", 4.0)], ProfileSource::Measured).unwrap()
    }

    #[test]
    fn alignment_error_is_mean_absolute_gap() {
        let targets = build_targets_from_adjustment(
            &baseline(),
            &[Adjustment::value("formal-informal", 4.0), Adjustment::value("distant-close", 5.0)],
        )
        .unwrap();
        let measured =
            IntentionProfile::from_pairs([("formal-informal", 4.5), ("distant-close", 4.5)], ProfileSource::Measured)
                .unwrap();
        assert_eq!(alignment_error(&measured, &targets).unwrap(), 0.5);
    }

    #[test]
    fn identity_candidate_passes_with_zero_error() {
        let draft = Draft::new("hello there", Granularity::Paragraph).unwrap();
        let content = FixedEmbedder::new(Space::Content, 2, [("hello there".to_string(), vec![1.0, 0.0])]);
        let style = FixedEmbedder::new(Space::Style, 3, [("hello there".to_string(), vec![0.0, 0.0, 1.0])]);
        let targets = build_targets_from_adjustment(&baseline(), &[]).unwrap();
        let v = validate_candidates(&draft, &["hello there".into()], &targets, &content, &style, &axes(), 0.8).unwrap();
        assert_eq!(v.accepted.len(), 1);
        assert_eq!(v.accepted[0].content_preservation, 1.0);
        assert_eq!(v.accepted[0].alignment_error, 0.0);
    }

    #[test]
    fn orthogonal_content_is_rejected_with_reason() {
        let draft = Draft::new("a", Granularity::Paragraph).unwrap();
        let content = FixedEmbedder::new(
            Space::Content,
            2,
            [("a".to_string(), vec![1.0, 0.0]), ("b".to_string(), vec![0.0, 1.0]), ("c".to_string(), vec![1.0, 0.1])],
        );
        let style = FixedEmbedder::new(Space::Style, 3, [("c".to_string(), vec![1.0, 0.0, 1.0])]);
        let targets = build_targets_from_adjustment(&baseline(), &[]).unwrap();
        let v = validate_candidates(&draft, &["b".into(), "c".into()], &targets, &content, &style, &axes(), 0.8).unwrap();
        assert_eq!(v.accepted.len(), 1);
        assert_eq!(v.accepted[0].text, "c");
        assert_eq!(
            v.rejected,
            [RejectedCandidate { text: "b".into(), reason: RejectionReason::ContentDrift { similarity: 0.0, threshold: 0.8 } }]
        );

        let err =
            validate_candidates(&draft, &["b".into()], &targets, &content, &style, &axes(), 0.8).unwrap_err();
        assert!(matches!(err, RewriteError::AllCandidatesRejected(r) if r.len() == 1));
    }

    #[test]
    fn word_level_edits_outside_flags_are_rejected() {
        let draft = Draft::new("I [[humbly]] ask.", Granularity::Word).unwrap();
        let content = FixedEmbedder::new(
            Space::Content,
            2,
            [
                ("I humbly ask.".to_string(), vec![1.0, 0.0]),
                ("I kindly ask.".to_string(), vec![1.0, 0.0]),
                ("We kindly ask.".to_string(), vec![1.0, 0.0]),
            ],
        );
        let style = FixedEmbedder::new(Space::Style, 3, [("I kindly ask.".to_string(), vec![0.0, 0.0, 1.0])]);
        let targets = build_targets_from_adjustment(&baseline(), &[]).unwrap();
        let v = validate_candidates(
            &draft,
            &["I kindly ask.".into(), "We kindly ask.".into()],
            &targets,
            &content,
            &style,
            &axes(),
            0.8,
        )
        .unwrap();
        assert_eq!(v.accepted.len(), 1);
        assert_eq!(v.rejected[0].reason, RejectionReason::EditOutsideFlaggedSpan);
    }
}
