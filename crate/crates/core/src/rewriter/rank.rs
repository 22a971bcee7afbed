use std::cmp::Ordering;

use super::{RewriteError, ScoredCandidate};
use crate::domain::RewriteSuggestion;

/// Ranking order: alignment error ascending, content preservation
/// descending, text length (in chars) ascending, then text.
pub fn ranking_key_cmp(a: &ScoredCandidate, b: &ScoredCandidate) -> Ordering {
    a.alignment_error
        .total_cmp(&b.alignment_error)
        .then_with(|| b.content_preservation.total_cmp(&a.content_preservation))
        .then_with(|| a.text.chars().count().cmp(&b.text.chars().count()))
        .then_with(|| a.text.cmp(&b.text))
}

/// Sorts candidates and assigns ranks `1..=n`.
pub fn rank_suggestions(candidates: Vec<ScoredCandidate>) -> Result<Vec<RewriteSuggestion>, RewriteError> {
    if candidates.is_empty() {
        return Err(RewriteError::EmptyInput);
    }
    let mut sorted = candidates;
    sorted.sort_by(ranking_key_cmp);
    Ok(sorted
        .into_iter()
        .zip(1u32..)
        .map(|(c, rank)| RewriteSuggestion {
            text: c.text,
            measured_profile: c.measured_profile,
            content_preservation: c.content_preservation,
            alignment_error: c.alignment_error,
            rank,
        })
        .collect())
}
