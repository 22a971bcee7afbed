use std::collections::HashSet;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{RewriteError, TargetProfile};
use crate::domain::{DimensionRegistry, Draft, Granularity, IntentionProfile, FLAG_CLOSE, FLAG_OPEN};
use crate::providers::{complete_structured, ChatProvider, PayloadSchema};
use crate::templates::{render, REWRITE_TEMPLATE};

pub const DEFAULT_K: usize = 3;
pub const MAX_K: usize = 8;

pub const REWRITE_SCHEMA: PayloadSchema =
    PayloadSchema { name: "rewrite", shape: r#"{"candidates": [{"text": "<rewrite>"}]}"# };

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diversity {
    Low,
    #[default]
    Medium,
    High,
}

impl Diversity {
    pub fn as_str(self) -> &'static str {
        match self {
            Diversity::Low => "low",
            Diversity::Medium => "medium",
            Diversity::High => "high",
        }
    }

    fn instruction(self) -> &'static str {
        match self {
            Diversity::Low => "Keep the alternatives close to one another.",
            Diversity::Medium => "Make the alternatives noticeably different from one another.",
            Diversity::High => "Make the alternatives as different from one another as the targets allow.",
        }
    }
}

impl FromStr for Diversity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(Diversity::Low),
            "medium" => Ok(Diversity::Medium),
            "high" => Ok(Diversity::High),
            other => Err(format!("unknown diversity `{other}` (expected low, medium or high)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewriteRequest {
    pub draft: Draft,
    pub baseline: IntentionProfile,
    pub targets: TargetProfile,
    pub k: usize,
    pub diversity: Diversity,
}

impl RewriteRequest {
    pub fn new(
        draft: Draft,
        baseline: IntentionProfile,
        targets: TargetProfile,
        k: usize,
        diversity: Diversity,
    ) -> Result<Self, RewriteError> {
        if !(1..=MAX_K).contains(&k) {
            return Err(RewriteError::InvalidRequest(format!("k must be in 1..={MAX_K}, got {k}")));
        }
        if let Some(e) = targets.entries().iter().find(|e| baseline.get(&e.dimension_id).is_none()) {
            return Err(RewriteError::UnknownDimension(e.dimension_id.clone()));
        }
        if draft.granularity() == Granularity::Word {
            word_edit_pattern(draft.text()).map_err(RewriteError::InvalidRequest)?;
        }
        Ok(Self { draft, baseline, targets, k, diversity })
    }
}

fn granularity_instruction(g: Granularity) -> String {
    let body = match g {
        Granularity::Paragraph => {
            "Rewrite the draft as a whole; sentences may be merged, split or reordered.".to_string()
        }
        Granularity::Sentence => {
            "Rewrite sentence by sentence; keep the same sentences in the same order and change only their wording."
                .to_string()
        }
        Granularity::Word => format!(
            "Replace only the words marked with {FLAG_OPEN} and {FLAG_CLOSE}. Copy every other character of the \
             draft exactly, and leave the markers themselves out of your rewrite."
        ),
    };
    format!("[granularity:{}] {body}", g.as_str())
}

/// One line per target, e.g.
/// `- move formal-informal from 2.0 toward 4.0, where 1=formal, 7=informal`.
pub fn dimension_lines(
    baseline: &IntentionProfile,
    targets: &TargetProfile,
    registry: &DimensionRegistry,
) -> String {
    targets
        .entries()
        .iter()
        .map(|t| {
            let from = baseline.get(&t.dimension_id).unwrap_or(t.target);
            let poles = registry
                .get(&t.dimension_id)
                .map(|d| format!(", where 1={}, 7={}", d.negative_pole(), d.positive_pole()))
                .unwrap_or_default();
            if t.locked {
                format!("- keep {} at {}{poles}", t.dimension_id, t.target)
            } else {
                format!("- move {} from {} toward {}{poles}", t.dimension_id, from, t.target)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn rewrite_prompt(req: &RewriteRequest, registry: &DimensionRegistry) -> Result<String, RewriteError> {
    let k = req.k.to_string();
    Ok(render(
        REWRITE_TEMPLATE,
        &[
            ("k", &k),
            ("granularity", req.draft.granularity().as_str()),
            ("granularity_instruction", &granularity_instruction(req.draft.granularity())),
            ("dimension_lines", &dimension_lines(&req.baseline, &req.targets, registry)),
            ("diversity_instruction", req.diversity.instruction()),
            ("draft", req.draft.text()),
        ],
    )?)
}

/// Regex matching any text that equals `draft` outside its flagged spans.
/// Fails when the draft has no flagged span or unbalanced markers.
pub fn word_edit_pattern(draft: &str) -> Result<Regex, String> {
    let mut pattern = String::from("(?s)^");
    let mut rest = draft;
    let mut spans = 0;
    while let Some(open) = rest.find(FLAG_OPEN) {
        let after = &rest[open + FLAG_OPEN.len()..];
        let close = after.find(FLAG_CLOSE).ok_or("a flagged span is not closed with `]]`")?;
        if after[..close].contains(FLAG_OPEN) {
            return Err("flagged spans cannot be nested".into());
        }
        if rest[..open].contains(FLAG_CLOSE) {
            return Err("`]]` without a matching `[[`".into());
        }
        pattern.push_str(&regex::escape(&rest[..open]));
        pattern.push_str("(.*?)");
        rest = &after[close + FLAG_CLOSE.len()..];
        spans += 1;
    }
    if rest.contains(FLAG_CLOSE) {
        return Err("`]]` without a matching `[[`".into());
    }
    if spans == 0 {
        return Err("word granularity needs at least one span flagged with [[ ]]".into());
    }
    pattern.push_str(&regex::escape(rest));
    pattern.push('$');
    Regex::new(&pattern).map_err(|e| e.to_string())
}

#[derive(Debug, Deserialize)]
struct RewritePayload {
    candidates: Vec<CandidateText>,
}

#[derive(Debug, Deserialize)]
struct CandidateText {
    text: String,
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// One completion asking for `req.k` rewrites. Blank texts are dropped,
/// whitespace-equivalent duplicates collapsed and the list cut to `k`,
/// keeping reply order.
pub fn generate_candidates(
    req: &RewriteRequest,
    registry: &DimensionRegistry,
    llm: &dyn ChatProvider,
    retries: u32,
) -> Result<Vec<String>, RewriteError> {
    let prompt = rewrite_prompt(req, registry)?;
    let texts = complete_structured(llm, &prompt, &REWRITE_SCHEMA, retries, |payload: RewritePayload| {
        let mut seen = HashSet::new();
        Ok(payload
            .candidates
            .into_iter()
            .map(|c| c.text.trim().to_string())
            .filter(|t| !t.is_empty())
            .filter(|t| seen.insert(normalize_ws(t)))
            .take(req.k)
            .collect::<Vec<_>>())
    })?;
    if texts.is_empty() {
        return Err(RewriteError::NoCandidates);
    }
    Ok(texts)
}
