//! Stage two: target intensities, candidate generation, validation, ranking.

mod generate;
mod rank;
mod targets;
mod validate;

pub use generate::{
    dimension_lines, generate_candidates, rewrite_prompt, word_edit_pattern, Diversity, RewriteRequest,
    DEFAULT_K, MAX_K, REWRITE_SCHEMA,
};
pub use rank::{rank_suggestions, ranking_key_cmp};
pub use targets::{
    build_targets_from_adjustment, infer_targets_from_native, native_prompt, AdjustValue, Adjustment, TargetBasis,
    TargetEntry, TargetProfile, NATIVE_SCHEMA,
};
pub use validate::{
    alignment_error, validate_candidates, RejectedCandidate, RejectionReason, ScoredCandidate, Validation,
    DEFAULT_CONTENT_GATE,
};

use thiserror::Error;

use crate::detector::DetectError;
use crate::domain::DomainError;
use crate::embedding::EmbeddingError;
use crate::providers::{ProviderError, StructuredError};
use crate::templates::TemplateError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewriteError {
    #[error("unknown dimension `{0}`")]
    UnknownDimension(String),
    #[error("dimension `{0}` is adjusted more than once")]
    DuplicateAdjustment(String),
    #[error("invalid adjustment: {0}")]
    InvalidAdjustment(String),
    #[error("the draft has no native-language text")]
    MissingNativeText,
    #[error("invalid rewrite request: {0}")]
    InvalidRequest(String),
    #[error("the model returned no candidate rewrites")]
    NoCandidates,
    #[error("all {} candidates were rejected", .0.len())]
    AllCandidatesRejected(Vec<RejectedCandidate>),
    #[error("nothing to rank")]
    EmptyInput,
    #[error(transparent)]
    Structured(#[from] StructuredError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}
