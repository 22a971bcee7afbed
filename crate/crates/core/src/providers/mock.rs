//! Deterministic embedders for tests and offline runs.
//!
//! [`MarkerStyleEmbedder`] counts pole-marker tokens: component `d` of the
//! vector is `positive markers - negative markers` for the `d`-th default
//! dimension. The last component carries a constant `2^-10` so that
//! marker-free text still has a non-zero, direction-free style vector.
//!
//! [`LexicalContentEmbedder`] is a feature-hashed bag of content words.
//! Stopwords and every style marker are dropped first, so two texts that
//! differ only in tone land close together in content space.

use std::collections::{HashMap, HashSet};
use std::sync::{Mutex, OnceLock};

use sha2::{Digest, Sha256};

use super::{EmbeddingInfo, EmbeddingProvider, ProviderError};
use crate::embedding::{Space, Vector};

/// Constant component appended to every marker vector.
pub const STYLE_BIAS: f64 = 1.0 / 1024.0;

/// Marker vocabulary for one dimension. Multi-word markers are matched on
/// consecutive tokens.
#[derive(Debug, Clone)]
pub struct DimensionMarkers {
    pub dimension_id: &'static str,
    pub negative: &'static [&'static str],
    pub positive: &'static [&'static str],
    /// Count contractions (`i'm`, `don't`, ...) as positive markers.
    pub contractions_positive: bool,
}

pub const CONTRACTION_SUFFIXES: &[&str] = &["n't", "'m", "'re", "'ll", "'ve", "'d"];

/// Markers for the five default dimensions, in registry order.
pub fn default_markers() -> &'static [DimensionMarkers] {
    static TABLE: OnceLock<Vec<DimensionMarkers>> = OnceLock::new();
    TABLE.get_or_init(|| {
        vec![
            DimensionMarkers {
                dimension_id: "formal-informal",
                negative: &[
                    "dear", "sincerely", "regards", "furthermore", "moreover", "therefore", "hence", "inquire",
                    "regarding", "hereby", "shall", "pursuant",
                ],
                positive: &["hey", "hi", "r", "u", "gonna", "wanna", "gotta", "lol", "yeah", "cool", "btw", "kinda"],
                contractions_positive: true,
            },
            DimensionMarkers {
                dimension_id: "direct-indirect",
                negative: &["want", "need", "must", "immediately", "asap", "now", "require"],
                positive: &["perhaps", "maybe", "possibly", "wondering", "might", "or something", "if possible"],
                contractions_positive: false,
            },
            DimensionMarkers {
                dimension_id: "distant-close",
                negative: &["professor", "prof", "sir", "madam", "mr", "mrs", "ms", "dr"],
                positive: &["remember", "recall", "chat", "catch up", "buddy", "pal", "folks", "see you"],
                contractions_positive: false,
            },
            DimensionMarkers {
                dimension_id: "respectful-disrespectful",
                negative: &["please", "thank", "thanks", "appreciate", "grateful", "honored", "kindly", "respectfully"],
                positive: &["whatever", "obviously", "ridiculous", "stupid", "demand", "hurry up", "duh", "seriously"],
                contractions_positive: false,
            },
            DimensionMarkers {
                dimension_id: "shy-bold",
                negative: &["sorry", "hope", "hopefully", "bother", "humbly", "hesitant", "nervous", "if it's okay"],
                positive: &[
                    "confident", "definitely", "certainly", "absolutely", "excellent", "strongly", "eager", "excited",
                ],
                contractions_positive: false,
            },
        ]
    })
}

/// Lowercased word tokens. Curly apostrophes are folded to `'`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .replace(['\u{2019}', '\u{2018}'], "'")
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\''))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn count_phrase(tokens: &[String], phrase: &str) -> i64 {
    let words: Vec<&str> = phrase.split(' ').collect();
    if words.len() > tokens.len() {
        return 0;
    }
    tokens.windows(words.len()).filter(|w| w.iter().zip(&words).all(|(t, p)| t == p)).count() as i64
}

fn is_contraction(token: &str) -> bool {
    CONTRACTION_SUFFIXES.iter().any(|s| token.len() > s.len() && token.ends_with(s))
}

pub struct MarkerStyleEmbedder {
    info: EmbeddingInfo,
    markers: Vec<DimensionMarkers>,
}

impl MarkerStyleEmbedder {
    /// `dim` must leave room for one component per dimension plus the bias.
    pub fn new(dim: usize) -> Self {
        Self::with_markers(dim, default_markers().to_vec())
    }

    pub fn with_markers(dim: usize, markers: Vec<DimensionMarkers>) -> Self {
        assert!(dim > markers.len(), "style dim {dim} too small for {} marker dimensions", markers.len());
        Self { info: EmbeddingInfo { model_id: "mock-marker-style".into(), space: Space::Style, dim }, markers }
    }

    /// Signed marker count per dimension, in table order.
    pub fn marker_counts(&self, text: &str) -> Vec<i64> {
        let tokens = tokenize(text);
        self.markers
            .iter()
            .map(|m| {
                let pos: i64 = m.positive.iter().map(|p| count_phrase(&tokens, p)).sum();
                let neg: i64 = m.negative.iter().map(|p| count_phrase(&tokens, p)).sum();
                let contractions =
                    if m.contractions_positive { tokens.iter().filter(|t| is_contraction(t)).count() as i64 } else { 0 };
                pos + contractions - neg
            })
            .collect()
    }

    pub fn vector_for(&self, text: &str) -> Vector {
        let mut components = vec![0.0; self.info.dim];
        for (slot, count) in components.iter_mut().zip(self.marker_counts(text)) {
            *slot = count as f64;
        }
        components[self.info.dim - 1] = STYLE_BIAS;
        Vector::style(components).expect("marker vectors are finite and non-empty")
    }
}

impl EmbeddingProvider for MarkerStyleEmbedder {
    fn info(&self) -> &EmbeddingInfo {
        &self.info
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>, ProviderError> {
        Ok(texts.iter().map(|t| self.vector_for(t)).collect())
    }
}

const STOPWORDS: &[&str] = &[
    "a", "about", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be", "been", "being", "but", "by",
    "can", "could", "did", "do", "does", "for", "from", "had", "has", "have", "he", "her", "here", "him", "his",
    "how", "i", "if", "in", "into", "is", "it", "its", "just", "let", "like", "me", "more", "my", "myself", "no",
    "not", "of", "on", "one", "or", "our", "out", "really", "she", "so", "some", "something", "such", "than",
    "that", "the", "their", "them", "then", "there", "these", "they", "this", "those", "to", "too", "up", "us",
    "very", "was", "we", "well", "were", "what", "when", "where", "which", "while", "who", "whom", "why", "will",
    "with", "would", "yes", "you", "your", "yours",
];

/// Crude suffix stripping so that inflections share a feature.
pub fn stem(token: &str) -> String {
    let mut t = token.to_string();
    for suffix in ["ing", "ed"] {
        if t.len() >= suffix.len() + 3 && t.ends_with(suffix) {
            t.truncate(t.len() - suffix.len());
            break;
        }
    }
    if t.len() >= 4 && t.ends_with('s') && !t.ends_with("ss") {
        t.pop();
    }
    if t.len() >= 4 && t.ends_with('e') {
        t.pop();
    }
    t
}

fn marker_words() -> &'static HashSet<String> {
    static WORDS: OnceLock<HashSet<String>> = OnceLock::new();
    WORDS.get_or_init(|| {
        default_markers()
            .iter()
            .flat_map(|m| m.negative.iter().chain(m.positive))
            .flat_map(|p| p.split(' ').map(str::to_string))
            .collect()
    })
}

/// Content words of `text` after stopword and marker removal, stemmed.
pub fn content_terms(text: &str) -> Vec<String> {
    let stop: HashSet<&str> = STOPWORDS.iter().copied().collect();
    tokenize(text)
        .into_iter()
        .map(|t| t.strip_suffix("'s").map(str::to_string).unwrap_or(t))
        .filter(|t| !t.contains('\''))
        .filter(|t| !stop.contains(t.as_str()) && !marker_words().contains(t))
        .map(|t| stem(&t))
        .collect()
}

fn feature(term: &str, dim: usize) -> (usize, f64) {
    let digest = Sha256::digest(term.as_bytes());
    let mut index_bytes = [0u8; 8];
    index_bytes.copy_from_slice(&digest[..8]);
    let index = (u64::from_le_bytes(index_bytes) % dim as u64) as usize;
    let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
    (index, sign)
}

pub struct LexicalContentEmbedder {
    info: EmbeddingInfo,
}

impl LexicalContentEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0);
        Self { info: EmbeddingInfo { model_id: "mock-lexical-content".into(), space: Space::Content, dim } }
    }

    pub fn vector_for(&self, text: &str) -> Vector {
        let dim = self.info.dim;
        let mut terms = content_terms(text);
        if terms.is_empty() {
            terms = tokenize(text);
        }
        let mut components = vec![0.0; dim];
        for term in &terms {
            let (i, sign) = feature(term, dim);
            components[i] += sign;
        }
        if components.iter().all(|c| *c == 0.0) {
            components[0] = 1.0;
        }
        Vector::content(components).expect("lexical vectors are finite and non-empty")
    }
}

impl EmbeddingProvider for LexicalContentEmbedder {
    fn info(&self) -> &EmbeddingInfo {
        &self.info
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>, ProviderError> {
        Ok(texts.iter().map(|t| self.vector_for(t)).collect())
    }
}

/// Looks vectors up in a fixed table; unknown texts are a protocol error.
pub struct FixedEmbedder {
    info: EmbeddingInfo,
    table: HashMap<String, Vector>,
}

impl FixedEmbedder {
    pub fn new(space: Space, dim: usize, entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Self {
        let table = entries
            .into_iter()
            .map(|(t, c)| {
                assert_eq!(c.len(), dim, "fixture vector for {t:?} has wrong dim");
                (t, Vector::new(space, c).expect("fixture vectors are finite"))
            })
            .collect();
        Self { info: EmbeddingInfo { model_id: format!("fixed-{space}"), space, dim }, table }
    }
}

impl EmbeddingProvider for FixedEmbedder {
    fn info(&self) -> &EmbeddingInfo {
        &self.info
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>, ProviderError> {
        texts
            .iter()
            .map(|t| self.table.get(t).cloned().ok_or_else(|| ProviderError::Protocol(format!("no fixture vector for {t:?}"))))
            .collect()
    }
}

/// Records every batch sent to the wrapped provider.
pub struct RecordingEmbedder<E> {
    inner: E,
    batches: Mutex<Vec<Vec<String>>>,
}

impl<E: EmbeddingProvider> RecordingEmbedder<E> {
    pub fn new(inner: E) -> Self {
        Self { inner, batches: Mutex::new(Vec::new()) }
    }

    pub fn batches(&self) -> Vec<Vec<String>> {
        self.batches.lock().expect("recorder lock poisoned").clone()
    }
}

impl<E: EmbeddingProvider> EmbeddingProvider for RecordingEmbedder<E> {
    fn info(&self) -> &EmbeddingInfo {
        self.inner.info()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>, ProviderError> {
        self.batches.lock().expect("recorder lock poisoned").push(texts.to_vec());
        self.inner.embed(texts)
    }
}
