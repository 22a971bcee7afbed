//! Shared vocabulary: dimensions, scores, drafts, profiles and suggestions.
//!
//! Every type here is immutable once constructed. Constructors and the serde
//! deserializers go through the same checks, so a value that exists is valid.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCORE_MIN: f64 = 1.0;
pub const SCORE_MAX: f64 = 7.0;
pub const SCORE_MID: f64 = 4.0;
pub const DEFAULT_MAX_DETECTED: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("unknown dimension `{0}`")]
    UnknownDimension(String),
    #[error("dimension `{0}` appears more than once")]
    DuplicateDimension(String),
    #[error("score {0} is outside the [1, 7] scale")]
    ScoreOutOfRange(f64),
    #[error("profile has {count} entries, allowed range is 1..={max}")]
    ProfileSize { count: usize, max: usize },
    #[error("profile has no entries")]
    EmptyProfile,
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid draft: {0}")]
    InvalidDraft(String),
}

/// Builds the canonical `<negative>-<positive>` id from two pole labels.
pub fn dimension_id(negative_pole: &str, positive_pole: &str) -> String {
    fn slug(label: &str) -> String {
        label
            .split_whitespace()
            .map(str::to_lowercase)
            .collect::<Vec<_>>()
            .join("-")
    }
    format!("{}-{}", slug(negative_pole), slug(positive_pole))
}

/// A bipolar axis of communicative tone. Low scores lean toward
/// `negative_pole`, high scores toward `positive_pole`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDimension")]
pub struct IntentionDimension {
    id: String,
    negative_pole: String,
    positive_pole: String,
    description: String,
}

#[derive(Deserialize)]
struct RawDimension {
    #[serde(default)]
    id: Option<String>,
    negative_pole: String,
    positive_pole: String,
    #[serde(default)]
    description: String,
}

impl TryFrom<RawDimension> for IntentionDimension {
    type Error = DomainError;

    fn try_from(raw: RawDimension) -> Result<Self, Self::Error> {
        let dim = IntentionDimension::new(&raw.negative_pole, &raw.positive_pole, &raw.description)?;
        match raw.id {
            Some(id) if id != dim.id => Err(DomainError::InvalidDimension(format!(
                "id `{id}` does not match poles (expected `{}`)",
                dim.id
            ))),
            _ => Ok(dim),
        }
    }
}

impl IntentionDimension {
    pub fn new(negative_pole: &str, positive_pole: &str, description: &str) -> Result<Self, DomainError> {
        let neg = negative_pole.trim();
        let pos = positive_pole.trim();
        if neg.is_empty() || pos.is_empty() {
            return Err(DomainError::InvalidDimension("pole labels must be non-empty".into()));
        }
        if neg.eq_ignore_ascii_case(pos) {
            return Err(DomainError::InvalidDimension(format!("poles must differ, got `{neg}` twice")));
        }
        Ok(Self {
            id: dimension_id(neg, pos),
            negative_pole: neg.to_string(),
            positive_pole: pos.to_string(),
            description: description.trim().to_string(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn negative_pole(&self) -> &str {
        &self.negative_pole
    }

    pub fn positive_pole(&self) -> &str {
        &self.positive_pole
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Pole a signed movement points toward.
    pub fn pole_toward(&self, delta: f64) -> &str {
        if delta < 0.0 {
            &self.negative_pole
        } else {
            &self.positive_pole
        }
    }
}

/// Ordered, closed set of dimensions the detector may report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRegistry")]
pub struct DimensionRegistry {
    dimensions: Vec<IntentionDimension>,
    max_detected: usize,
}

#[derive(Deserialize)]
struct RawRegistry {
    dimensions: Vec<IntentionDimension>,
    #[serde(default = "default_max_detected")]
    max_detected: usize,
}

fn default_max_detected() -> usize {
    DEFAULT_MAX_DETECTED
}

impl TryFrom<RawRegistry> for DimensionRegistry {
    type Error = DomainError;

    fn try_from(raw: RawRegistry) -> Result<Self, Self::Error> {
        DimensionRegistry::new(raw.dimensions, raw.max_detected)
    }
}

impl Default for DimensionRegistry {
    fn default() -> Self {
        let dims = [
            ("formal", "informal", "Register of the wording, from ceremonious to casual."),
            ("direct", "indirect", "How plainly the request or point is stated."),
            ("distant", "close", "Social distance the writer assumes with the reader."),
            ("respectful", "disrespectful", "Deference shown toward the reader."),
            ("shy", "bold", "Confidence with which the writer puts themself forward."),
        ];
        let dimensions = dims
            .iter()
            .map(|(n, p, d)| IntentionDimension::new(n, p, d).expect("default dimensions are well-formed"))
            .collect();
        Self::new(dimensions, DEFAULT_MAX_DETECTED).expect("default registry is well-formed")
    }
}

impl DimensionRegistry {
    pub fn new(dimensions: Vec<IntentionDimension>, max_detected: usize) -> Result<Self, DomainError> {
        if dimensions.is_empty() {
            return Err(DomainError::InvalidDimension("registry must list at least one dimension".into()));
        }
        if max_detected == 0 {
            return Err(DomainError::InvalidDimension("max_detected must be positive".into()));
        }
        let mut seen = HashSet::new();
        for dim in &dimensions {
            if !seen.insert(dim.id.as_str()) {
                return Err(DomainError::DuplicateDimension(dim.id.clone()));
            }
        }
        Ok(Self { dimensions, max_detected })
    }

    /// Parses the TOML registry file format.
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn dimensions(&self) -> &[IntentionDimension] {
        &self.dimensions
    }

    pub fn max_detected(&self) -> usize {
        self.max_detected
    }

    pub fn get(&self, id: &str) -> Option<&IntentionDimension> {
        self.dimensions.iter().find(|d| d.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.dimensions.iter().map(|d| d.id.as_str())
    }

    pub fn len(&self) -> usize {
        self.dimensions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dimensions.is_empty()
    }

    /// Checks an unchecked profile against this registry and returns the
    /// typed profile.
    pub fn validate_profile(&self, profile: &RawProfile) -> Result<IntentionProfile, DomainError> {
        let mut seen = HashSet::new();
        for entry in &profile.entries {
            if !self.contains(&entry.dimension_id) {
                return Err(DomainError::UnknownDimension(entry.dimension_id.clone()));
            }
            if !seen.insert(entry.dimension_id.as_str()) {
                return Err(DomainError::DuplicateDimension(entry.dimension_id.clone()));
            }
            IntensityScore::new(entry.score)?;
        }
        if profile.entries.len() > self.max_detected {
            return Err(DomainError::ProfileSize { count: profile.entries.len(), max: self.max_detected });
        }
        IntentionProfile::try_from(profile.clone())
    }
}

/// A position on the 7-point scale, stored as a real number.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct IntensityScore(f64);

impl IntensityScore {
    pub const MIDPOINT: IntensityScore = IntensityScore(SCORE_MID);

    pub fn new(value: f64) -> Result<Self, DomainError> {
        if value.is_finite() && (SCORE_MIN..=SCORE_MAX).contains(&value) {
            Ok(Self(value))
        } else {
            Err(DomainError::ScoreOutOfRange(value))
        }
    }

    /// Clamps any finite value onto the scale. NaN maps to the midpoint.
    pub fn clamped(value: f64) -> Self {
        if value.is_nan() {
            return Self::MIDPOINT;
        }
        Self(value.clamp(SCORE_MIN, SCORE_MAX))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Half-up rounding to one decimal, for display only.
    pub fn display_value(self) -> f64 {
        round_half_up_1dp(self.0)
    }
}

impl TryFrom<f64> for IntensityScore {
    type Error = DomainError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<IntensityScore> for f64 {
    fn from(score: IntensityScore) -> f64 {
        score.0
    }
}

impl fmt::Display for IntensityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}", self.display_value())
    }
}

/// Rounds half away from zero at one decimal. The small bias absorbs binary
/// representation error so that e.g. 5.55 displays as 5.6.
pub fn round_half_up_1dp(value: f64) -> f64 {
    let scaled = value.abs() * 10.0;
    let rounded = (scaled + 0.5 + 1e-9).floor() / 10.0;
    rounded.copysign(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    #[default]
    Paragraph,
    Sentence,
    Word,
}

impl Granularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Paragraph => "paragraph",
            Granularity::Sentence => "sentence",
            Granularity::Word => "word",
        }
    }
}

impl std::str::FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paragraph" => Ok(Granularity::Paragraph),
            "sentence" => Ok(Granularity::Sentence),
            "word" => Ok(Granularity::Word),
            other => Err(format!("unknown granularity `{other}` (expected paragraph, sentence or word)")),
        }
    }
}

/// Flagged-word spans in word-granularity drafts are written `[[like this]]`.
pub const FLAG_OPEN: &str = "[[";
pub const FLAG_CLOSE: &str = "]]";

/// The user's text, optionally accompanied by a version in their native language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDraft")]
pub struct Draft {
    text: String,
    granularity: Granularity,
    native_text: Option<String>,
    native_language: Option<String>,
}

#[derive(Deserialize)]
struct RawDraft {
    text: String,
    #[serde(default)]
    granularity: Granularity,
    #[serde(default)]
    native_text: Option<String>,
    #[serde(default)]
    native_language: Option<String>,
}

impl TryFrom<RawDraft> for Draft {
    type Error = DomainError;

    fn try_from(raw: RawDraft) -> Result<Self, Self::Error> {
        let draft = Draft::new(raw.text, raw.granularity)?;
        match (raw.native_text, raw.native_language) {
            (None, None) => Ok(draft),
            (Some(text), Some(lang)) => draft.with_native(text, lang),
            _ => Err(DomainError::InvalidDraft(
                "native_text and native_language must be given together".into(),
            )),
        }
    }
}

impl Draft {
    pub fn new(text: impl Into<String>, granularity: Granularity) -> Result<Self, DomainError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(DomainError::InvalidDraft("text is empty".into()));
        }
        Ok(Self { text, granularity, native_text: None, native_language: None })
    }

    pub fn with_native(mut self, native_text: impl Into<String>, language: impl Into<String>) -> Result<Self, DomainError> {
        let native_text = native_text.into();
        let language = language.into();
        if native_text.trim().is_empty() {
            return Err(DomainError::InvalidDraft("native_text is empty".into()));
        }
        if !is_language_tag(&language) {
            return Err(DomainError::InvalidDraft(format!("`{language}` is not a BCP-47 language tag")));
        }
        self.native_text = Some(native_text);
        self.native_language = Some(language);
        Ok(self)
    }

    pub fn with_granularity(&self, granularity: Granularity) -> Self {
        Self { granularity, ..self.clone() }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn native_text(&self) -> Option<&str> {
        self.native_text.as_deref()
    }

    pub fn native_language(&self) -> Option<&str> {
        self.native_language.as_deref()
    }

    /// Text as the reader would see it: flag markers are removed for
    /// word-granularity drafts.
    pub fn plain_text(&self) -> String {
        match self.granularity {
            Granularity::Word => self.text.replace(FLAG_OPEN, "").replace(FLAG_CLOSE, ""),
            _ => self.text.clone(),
        }
    }
}

/// Structural check for BCP-47 tags: a 2-3 or 5-8 letter primary subtag
/// followed by 1-8 character alphanumeric subtags.
pub fn is_language_tag(tag: &str) -> bool {
    let mut parts = tag.split('-');
    let Some(primary) = parts.next() else { return false };
    let primary_ok = matches!(primary.len(), 2..=3 | 5..=8) && primary.chars().all(|c| c.is_ascii_alphabetic());
    primary_ok && parts.all(|p| (1..=8).contains(&p.len()) && p.chars().all(|c| c.is_ascii_alphanumeric()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSource {
    Measured,
    UserAdjusted,
    NativeInferred,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub dimension_id: String,
    pub score: IntensityScore,
}

/// Unchecked profile shape, as it arrives over the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawProfile {
    pub entries: Vec<RawProfileEntry>,
    pub source: ProfileSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawProfileEntry {
    pub dimension_id: String,
    pub score: f64,
}

impl RawProfile {
    pub fn new<S: Into<String>>(entries: impl IntoIterator<Item = (S, f64)>, source: ProfileSource) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|(id, score)| RawProfileEntry { dimension_id: id.into(), score })
                .collect(),
            source,
        }
    }
}

/// Ordered (dimension, score) pairs. Order is meaningful: it is the
/// dominance order reported at detection time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile")]
pub struct IntentionProfile {
    entries: Vec<ProfileEntry>,
    source: ProfileSource,
}

impl TryFrom<RawProfile> for IntentionProfile {
    type Error = DomainError;

    fn try_from(raw: RawProfile) -> Result<Self, Self::Error> {
        let entries = raw
            .entries
            .into_iter()
            .map(|e| Ok(ProfileEntry { score: IntensityScore::new(e.score)?, dimension_id: e.dimension_id }))
            .collect::<Result<Vec<_>, DomainError>>()?;
        IntentionProfile::new(entries, raw.source)
    }
}

impl IntentionProfile {
    pub fn new(entries: Vec<ProfileEntry>, source: ProfileSource) -> Result<Self, DomainError> {
        if entries.is_empty() {
            return Err(DomainError::EmptyProfile);
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.dimension_id.as_str()) {
                return Err(DomainError::DuplicateDimension(e.dimension_id.clone()));
            }
        }
        Ok(Self { entries, source })
    }

    pub fn from_pairs<S: Into<String>>(
        pairs: impl IntoIterator<Item = (S, f64)>,
        source: ProfileSource,
    ) -> Result<Self, DomainError> {
        Self::try_from(RawProfile::new(pairs, source))
    }

    pub fn entries(&self) -> &[ProfileEntry] {
        &self.entries
    }

    pub fn source(&self) -> ProfileSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, dimension_id: &str) -> Option<IntensityScore> {
        self.entries.iter().find(|e| e.dimension_id == dimension_id).map(|e| e.score)
    }

    pub fn dimension_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.dimension_id.as_str())
    }

    pub fn to_raw(&self) -> RawProfile {
        RawProfile::new(self.entries.iter().map(|e| (e.dimension_id.clone(), e.score.value())), self.source)
    }

    pub fn validate_against(&self, registry: &DimensionRegistry) -> Result<(), DomainError> {
        registry.validate_profile(&self.to_raw()).map(|_| ())
    }
}

/// A validated candidate rewrite with its position in the ranked set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriteSuggestion {
    pub text: String,
    pub measured_profile: IntentionProfile,
    pub content_preservation: f64,
    pub alignment_error: f64,
    pub rank: u32,
}
