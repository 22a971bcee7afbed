//! Backend for an explainable rewriting assistant aimed at non-native
//! English writers.
//!
//! A draft goes through three stages: [`detector`] finds the social
//! intentions it conveys and scores them on calibrated style axes,
//! [`rewriter`] regenerates it toward user-chosen target intensities, and
//! [`explainer`] describes how the resulting suggestions differ. Model
//! services sit behind the traits in [`providers`].

pub mod anchors;
pub mod config;
pub mod detector;
pub mod domain;
pub mod embedding;
pub mod error;
pub mod explainer;
pub mod pipeline;
pub mod providers;
pub mod rewriter;
pub mod session;
pub mod templates;

pub use error::{Error, ErrorClass, Result};
