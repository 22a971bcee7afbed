use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RewriteError;
use crate::domain::{DimensionRegistry, Draft, IntensityScore, IntentionProfile, ProfileEntry, ProfileSource};
use crate::providers::{complete_structured, ChatProvider, PayloadSchema};
use crate::templates::{render, NATIVE_TEMPLATE};

pub const NATIVE_SCHEMA: PayloadSchema = PayloadSchema {
    name: "native_targets",
    shape: r#"{"targets": [{"id": "<dimension id>", "score": <number from 1 to 7>}]}"#,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetBasis {
    UserAdjusted,
    NativeInferred,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEntry {
    pub dimension_id: String,
    pub target: IntensityScore,
    /// The user asked to keep this dimension where it was measured.
    pub locked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTargets")]
pub struct TargetProfile {
    entries: Vec<TargetEntry>,
    basis: TargetBasis,
}

#[derive(Deserialize)]
struct RawTargets {
    entries: Vec<TargetEntry>,
    basis: TargetBasis,
}

impl TryFrom<RawTargets> for TargetProfile {
    type Error = RewriteError;

    fn try_from(raw: RawTargets) -> Result<Self, Self::Error> {
        TargetProfile::new(raw.entries, raw.basis)
    }
}

impl TargetProfile {
    pub fn new(entries: Vec<TargetEntry>, basis: TargetBasis) -> Result<Self, RewriteError> {
        if entries.is_empty() {
            return Err(RewriteError::InvalidRequest("target profile is empty".into()));
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.dimension_id.as_str()) {
                return Err(RewriteError::DuplicateAdjustment(e.dimension_id.clone()));
            }
        }
        Ok(Self { entries, basis })
    }

    pub fn entries(&self) -> &[TargetEntry] {
        &self.entries
    }

    pub fn basis(&self) -> TargetBasis {
        self.basis
    }

    pub fn get(&self, dimension_id: &str) -> Option<&TargetEntry> {
        self.entries.iter().find(|e| e.dimension_id == dimension_id)
    }

    pub fn dimension_ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.dimension_id.clone()).collect()
    }

    /// Targets as a plain profile, e.g. to feed back in as a baseline.
    pub fn as_profile(&self) -> IntentionProfile {
        let source = match self.basis {
            TargetBasis::UserAdjusted => ProfileSource::UserAdjusted,
            TargetBasis::NativeInferred => ProfileSource::NativeInferred,
        };
        let entries =
            self.entries.iter().map(|e| ProfileEntry { dimension_id: e.dimension_id.clone(), score: e.target }).collect();
        IntentionProfile::new(entries, source).expect("target profile invariants match profile invariants")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjustValue {
    /// Absolute target score.
    Value(f64),
    /// Offset from the measured score.
    Delta(f64),
}

/// One requested change. JSON: `{"dimension_id": "...", "value": 5}` or
/// `{"dimension_id": "...", "delta": 2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjustment {
    pub dimension_id: String,
    #[serde(flatten)]
    pub change: AdjustValue,
}

impl Adjustment {
    pub fn value(dimension_id: impl Into<String>, value: f64) -> Self {
        Self { dimension_id: dimension_id.into(), change: AdjustValue::Value(value) }
    }

    pub fn delta(dimension_id: impl Into<String>, delta: f64) -> Self {
        Self { dimension_id: dimension_id.into(), change: AdjustValue::Delta(delta) }
    }
}

/// `dim=5` sets an absolute score, `dim=+2` / `dim=-1.5` shift it.
impl FromStr for Adjustment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (id, rhs) = s.split_once('=').ok_or_else(|| format!("expected `dimension=score` or `dimension=±delta`, got `{s}`"))?;
        let id = id.trim();
        let rhs = rhs.trim();
        if id.is_empty() {
            return Err(format!("missing dimension id in `{s}`"));
        }
        let number: f64 = rhs.parse().map_err(|_| format!("`{rhs}` is not a number"))?;
        if !number.is_finite() {
            return Err(format!("`{rhs}` is not a finite number"));
        }
        Ok(if rhs.starts_with('+') || rhs.starts_with('-') {
            Adjustment::delta(id, number)
        } else {
            Adjustment::value(id, number)
        })
    }
}

impl fmt::Display for Adjustment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.change {
            AdjustValue::Value(v) => write!(f, "{}={v}", self.dimension_id),
            AdjustValue::Delta(d) => write!(f, "{}={d:+}", self.dimension_id),
        }
    }
}

/// Applies user adjustments to the measured baseline. Adjusted dimensions
/// are clamped onto the scale; untouched ones are locked at their measured
/// score. Entries keep the baseline order.
pub fn build_targets_from_adjustment(
    baseline: &IntentionProfile,
    adjustments: &[Adjustment],
) -> Result<TargetProfile, RewriteError> {
    let mut by_id: HashMap<&str, AdjustValue> = HashMap::new();
    for adj in adjustments {
        if baseline.get(&adj.dimension_id).is_none() {
            return Err(RewriteError::UnknownDimension(adj.dimension_id.clone()));
        }
        let raw = match adj.change {
            AdjustValue::Value(v) | AdjustValue::Delta(v) => v,
        };
        if !raw.is_finite() {
            return Err(RewriteError::InvalidAdjustment(format!("{} is not a finite number", adj.dimension_id)));
        }
        if by_id.insert(&adj.dimension_id, adj.change).is_some() {
            return Err(RewriteError::DuplicateAdjustment(adj.dimension_id.clone()));
        }
    }
    let entries = baseline
        .entries()
        .iter()
        .map(|e| match by_id.get(e.dimension_id.as_str()) {
            Some(AdjustValue::Value(v)) => TargetEntry {
                dimension_id: e.dimension_id.clone(),
                target: IntensityScore::clamped(*v),
                locked: false,
            },
            Some(AdjustValue::Delta(d)) => TargetEntry {
                dimension_id: e.dimension_id.clone(),
                target: IntensityScore::clamped(e.score.value() + d),
                locked: false,
            },
            None => TargetEntry { dimension_id: e.dimension_id.clone(), target: e.score, locked: true },
        })
        .collect();
    TargetProfile::new(entries, TargetBasis::UserAdjusted)
}

#[derive(Debug, Deserialize)]
struct NativePayload {
    targets: Vec<NativeTarget>,
}

#[derive(Debug, Deserialize)]
struct NativeTarget {
    id: String,
    score: f64,
}

fn baseline_lines(baseline: &IntentionProfile, registry: &DimensionRegistry) -> String {
    baseline
        .entries()
        .iter()
        .map(|e| match registry.get(&e.dimension_id) {
            Some(d) => format!(
                "- {}: currently {}, where 1={}, 7={}",
                e.dimension_id,
                e.score,
                d.negative_pole(),
                d.positive_pole()
            ),
            None => format!("- {}: currently {}", e.dimension_id, e.score),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn native_prompt(draft: &Draft, baseline: &IntentionProfile, registry: &DimensionRegistry) -> Result<String, RewriteError> {
    let native = draft.native_text().ok_or(RewriteError::MissingNativeText)?;
    let language = draft.native_language().unwrap_or("unknown");
    Ok(render(
        NATIVE_TEMPLATE,
        &[
            ("native_language", language),
            ("dimension_lines", &baseline_lines(baseline, registry)),
            ("draft", &draft.plain_text()),
            ("native_text", native),
        ],
    )?)
}

/// Asks the model which scores the native-language version conveys.
/// Scores are clamped onto the scale; dimensions the model leaves out are
/// locked at the baseline and ids outside the baseline are ignored.
pub fn infer_targets_from_native(
    draft: &Draft,
    baseline: &IntentionProfile,
    registry: &DimensionRegistry,
    llm: &dyn ChatProvider,
    retries: u32,
) -> Result<TargetProfile, RewriteError> {
    let prompt = native_prompt(draft, baseline, registry)?;
    let inferred: HashMap<String, f64> =
        complete_structured(llm, &prompt, &NATIVE_SCHEMA, retries, |payload: NativePayload| {
            let mut out = HashMap::new();
            for t in payload.targets {
                if !t.score.is_finite() {
                    return Err(format!("score for `{}` is not a finite number", t.id));
                }
                if baseline.get(&t.id).is_some() {
                    out.entry(t.id).or_insert(t.score);
                }
            }
            Ok(out)
        })?;
    let entries = baseline
        .entries()
        .iter()
        .map(|e| match inferred.get(&e.dimension_id) {
            Some(score) => TargetEntry {
                dimension_id: e.dimension_id.clone(),
                target: IntensityScore::clamped(*score),
                locked: false,
            },
            None => TargetEntry { dimension_id: e.dimension_id.clone(), target: e.score, locked: true },
        })
        .collect();
    TargetProfile::new(entries, TargetBasis::NativeInferred)
}
