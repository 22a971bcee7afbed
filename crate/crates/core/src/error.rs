//! Crate-level error and the coarse classes callers map to HTTP statuses
//! and exit codes.

use thiserror::Error;

use crate::anchors::AnchorError;
use crate::config::ConfigError;
use crate::detector::DetectError;
use crate::domain::DomainError;
use crate::embedding::EmbeddingError;
use crate::explainer::ExplainError;
use crate::providers::{ProviderError, StructuredError};
use crate::rewriter::RewriteError;
use crate::session::SessionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input from the caller.
    Validation,
    NotFound,
    /// Request is out of order for the session.
    Conflict,
    /// A model service failed or could not be reached.
    Provider,
    /// The model kept replying with unusable output.
    ModelOutput,
    /// Every candidate rewrite failed validation.
    Rejected,
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Anchor(#[from] AnchorError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Structured(#[from] StructuredError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("session `{0}` not found")]
    SessionNotFound(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Internal(String),
}

fn structured_class(e: &StructuredError) -> ErrorClass {
    match e {
        StructuredError::InputTooLong { .. } => ErrorClass::Validation,
        StructuredError::Provider(_) => ErrorClass::Provider,
        StructuredError::MalformedModelOutput { .. } => ErrorClass::ModelOutput,
    }
}

fn provider_class(e: &ProviderError) -> ErrorClass {
    match e {
        ProviderError::ReplayMismatch { .. } | ProviderError::ReplayExhausted { .. } => ErrorClass::Internal,
        _ => ErrorClass::Provider,
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Domain(_) | Error::Invalid(_) => ErrorClass::Validation,
            Error::Detect(e) => match e {
                DetectError::InvalidRequest(_) => ErrorClass::Validation,
                DetectError::Structured(s) => structured_class(s),
                DetectError::NoDimensionsDetected => ErrorClass::ModelOutput,
                DetectError::Provider(p) => provider_class(p),
                DetectError::MissingAxis(_) | DetectError::Embedding(_) | DetectError::Template(_) => {
                    ErrorClass::Internal
                }
            },
            Error::Rewrite(e) => match e {
                RewriteError::UnknownDimension(_)
                | RewriteError::DuplicateAdjustment(_)
                | RewriteError::InvalidAdjustment(_)
                | RewriteError::MissingNativeText
                | RewriteError::InvalidRequest(_)
                | RewriteError::Domain(_) => ErrorClass::Validation,
                RewriteError::NoCandidates => ErrorClass::ModelOutput,
                RewriteError::AllCandidatesRejected(_) => ErrorClass::Rejected,
                RewriteError::Structured(s) => structured_class(s),
                RewriteError::Provider(p) => provider_class(p),
                RewriteError::Detect(d) => Error::Detect(d.clone()).class(),
                RewriteError::EmptyInput | RewriteError::Embedding(_) | RewriteError::Template(_) => {
                    ErrorClass::Internal
                }
            },
            Error::Explain(e) => match e {
                ExplainError::Provider(p) => provider_class(p),
                _ => ErrorClass::Internal,
            },
            Error::Session(e) => match e {
                SessionError::UnknownRank { .. } => ErrorClass::Validation,
                _ => ErrorClass::Conflict,
            },
            Error::Anchor(AnchorError::Provider(p)) => provider_class(p),
            Error::Anchor(_) | Error::Config(_) => ErrorClass::Validation,
            Error::Provider(p) => provider_class(p),
            Error::Structured(s) => structured_class(s),
            Error::Embedding(_) | Error::Internal(_) => ErrorClass::Internal,
            Error::SessionNotFound(_) => ErrorClass::NotFound,
        }
    }

    /// Per-candidate reasons when every rewrite was rejected.
    pub fn rejections(&self) -> Option<&[crate::rewriter::RejectedCandidate]> {
        match self {
            Error::Rewrite(RewriteError::AllCandidatesRejected(r)) => Some(r),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
