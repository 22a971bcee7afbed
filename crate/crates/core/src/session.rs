//! Append-only session event log with causal ordering rules.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Draft, Granularity, IntentionProfile, RewriteSuggestion};
use crate::explainer::NuanceReport;
use crate::rewriter::{Diversity, RejectedCandidate, TargetProfile};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("session has no analyze event yet")]
    NoPriorAnalyze,
    #[error("session has no rewrite event yet")]
    NoPriorRewrite,
    #[error("rank {rank} is not in the latest rewrite (1..={available})")]
    UnknownRank { rank: u32, available: u32 },
    #[error("session already has an analyze event")]
    AlreadyAnalyzed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventPayload {
    Analyze { draft: Draft, profile: IntentionProfile },
    Adjust { targets: TargetProfile },
    Rewrite {
        granularity: Granularity,
        k: usize,
        diversity: Diversity,
        targets: TargetProfile,
        suggestions: Vec<RewriteSuggestion>,
        rejected: Vec<RejectedCandidate>,
    },
    Explain { report: NuanceReport },
    Select { rank: u32 },
}

impl EventPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::Analyze { .. } => "analyze",
            EventPayload::Adjust { .. } => "adjust",
            EventPayload::Rewrite { .. } => "rewrite",
            EventPayload::Explain { .. } => "explain",
            EventPayload::Select { .. } => "select",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub timestamp: DateTime<Utc>,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub created_at: DateTime<Utc>,
    pub events: Vec<SessionEvent>,
}

impl Session {
    pub fn new(id: impl Into<String>, created_at: DateTime<Utc>) -> Self {
        Self { id: id.into(), created_at, events: Vec::new() }
    }

    pub fn analysis(&self) -> Option<(&Draft, &IntentionProfile)> {
        self.events.iter().find_map(|e| match &e.payload {
            EventPayload::Analyze { draft, profile } => Some((draft, profile)),
            _ => None,
        })
    }

    pub fn latest_rewrite(&self) -> Option<&SessionEvent> {
        self.events.iter().rev().find(|e| matches!(e.payload, EventPayload::Rewrite { .. }))
    }

    pub fn latest_suggestions(&self) -> Option<&[RewriteSuggestion]> {
        self.latest_rewrite().and_then(|e| match &e.payload {
            EventPayload::Rewrite { suggestions, .. } => Some(suggestions.as_slice()),
            _ => None,
        })
    }

    /// Checks that `payload` may follow the events recorded so far.
    pub fn check(&self, payload: &EventPayload) -> Result<(), SessionError> {
        match payload {
            EventPayload::Analyze { .. } if self.analysis().is_some() => Err(SessionError::AlreadyAnalyzed),
            EventPayload::Analyze { .. } => Ok(()),
            EventPayload::Adjust { .. } | EventPayload::Rewrite { .. } if self.analysis().is_none() => {
                Err(SessionError::NoPriorAnalyze)
            }
            EventPayload::Adjust { .. } | EventPayload::Rewrite { .. } => Ok(()),
            EventPayload::Explain { .. } => self.latest_rewrite().map(|_| ()).ok_or(SessionError::NoPriorRewrite),
            EventPayload::Select { rank } => {
                let suggestions = self.latest_suggestions().ok_or(SessionError::NoPriorRewrite)?;
                if suggestions.iter().any(|s| s.rank == *rank) {
                    Ok(())
                } else {
                    Err(SessionError::UnknownRank { rank: *rank, available: suggestions.len() as u32 })
                }
            }
        }
    }

    /// Appends after [`Session::check`]. The timestamp is nudged forward
    /// when the clock has not moved past the previous event.
    pub fn append(&mut self, payload: EventPayload, now: DateTime<Utc>) -> Result<&SessionEvent, SessionError> {
        self.check(&payload)?;
        let timestamp = match self.events.last() {
            Some(last) if now <= last.timestamp => last.timestamp + Duration::microseconds(1),
            _ => now,
        };
        let seq = self.events.len() as u64 + 1;
        self.events.push(SessionEvent { seq, timestamp, payload });
        Ok(self.events.last().expect("just pushed"))
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Deterministic clock advancing one second per reading.
pub struct StepClock {
    start: DateTime<Utc>,
    ticks: AtomicU64,
}

impl StepClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        Self { start, ticks: AtomicU64::new(0) }
    }

    pub fn from_unix(secs: i64) -> Self {
        Self::new(Utc.timestamp_opt(secs, 0).single().expect("valid unix time"))
    }
}

impl Clock for StepClock {
    fn now(&self) -> DateTime<Utc> {
        let n = self.ticks.fetch_add(1, Ordering::SeqCst);
        self.start + Duration::seconds(n as i64)
    }
}

pub trait IdSource: Send + Sync {
    fn next_id(&self) -> String;
}

/// 128-bit random hex ids.
pub struct RandomIds;

impl IdSource for RandomIds {
    fn next_id(&self) -> String {
        let bytes: [u8; 16] = rand::rng().random();
        bytes.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `s000001`, `s000002`, ... for reproducible traces.
#[derive(Default)]
pub struct SequentialIds(Mutex<u64>);

impl IdSource for SequentialIds {
    fn next_id(&self) -> String {
        let mut n = self.0.lock().expect("id lock poisoned");
        *n += 1;
        format!("s{:06}", *n)
    }
}

/// Session ids are opaque tokens, but they end up in file names.
pub fn is_valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}
