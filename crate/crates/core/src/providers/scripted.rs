//! Transcript replay for chat providers.
//!
//! A transcript is a JSON array of turns:
//!
//! ```json
//! [{"expect_prompt_contains": ["formal-informal"], "reply": "{\"dimensions\": []}"}]
//! ```
//!
//! Each call consumes the next turn. A prompt missing any expected substring
//! fails with [`ProviderError::ReplayMismatch`]; running past the end fails
//! with [`ProviderError::ReplayExhausted`]. A turn with `fail_with` simulates
//! an unreachable service.

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatInfo, ChatProvider, ProviderError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptTurn {
    #[serde(default)]
    pub expect_prompt_contains: Vec<String>,
    #[serde(default)]
    pub reply: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail_with: Option<String>,
}

impl TranscriptTurn {
    pub fn reply(reply: impl Into<String>) -> Self {
        Self { expect_prompt_contains: Vec::new(), reply: reply.into(), fail_with: None }
    }

    pub fn expecting(needles: &[&str], reply: impl Into<String>) -> Self {
        Self {
            expect_prompt_contains: needles.iter().map(|s| s.to_string()).collect(),
            reply: reply.into(),
            fail_with: None,
        }
    }

    pub fn failing(reason: impl Into<String>) -> Self {
        Self { expect_prompt_contains: Vec::new(), reply: String::new(), fail_with: Some(reason.into()) }
    }
}

pub fn load_transcript(path: &Path) -> Result<Vec<TranscriptTurn>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

pub struct ScriptedChat {
    info: ChatInfo,
    turns: Vec<TranscriptTurn>,
    state: Mutex<ReplayState>,
}

#[derive(Default)]
struct ReplayState {
    cursor: usize,
    prompts: Vec<String>,
}

impl ScriptedChat {
    pub fn new(turns: Vec<TranscriptTurn>) -> Self {
        Self {
            info: ChatInfo { model_id: "scripted".into(), max_input_chars: 100_000 },
            turns,
            state: Mutex::new(ReplayState::default()),
        }
    }

    pub fn from_replies<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self::new(replies.into_iter().map(TranscriptTurn::reply).collect())
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        load_transcript(path).map(Self::new)
    }

    pub fn with_max_input_chars(mut self, max: usize) -> Self {
        self.info.max_input_chars = max;
        self
    }

    /// Number of calls made so far, including failed ones.
    pub fn calls(&self) -> usize {
        self.state.lock().expect("replay lock poisoned").prompts.len()
    }

    pub fn prompts(&self) -> Vec<String> {
        self.state.lock().expect("replay lock poisoned").prompts.clone()
    }

    pub fn remaining(&self) -> usize {
        self.turns.len() - self.state.lock().expect("replay lock poisoned").cursor
    }
}

impl ChatProvider for ScriptedChat {
    fn info(&self) -> &ChatInfo {
        &self.info
    }

    fn complete(&self, prompt: &str, _schema_hint: Option<&str>) -> Result<String, ProviderError> {
        let mut state = self.state.lock().expect("replay lock poisoned");
        state.prompts.push(prompt.to_string());
        let turn_index = state.cursor;
        let turn = self.turns.get(turn_index).ok_or(ProviderError::ReplayExhausted { turns: self.turns.len() })?;
        state.cursor += 1;
        let missing: Vec<String> =
            turn.expect_prompt_contains.iter().filter(|n| !prompt.contains(n.as_str())).cloned().collect();
        if !missing.is_empty() {
            return Err(ProviderError::ReplayMismatch { turn: turn_index, missing, prompt: prompt.to_string() });
        }
        match &turn.fail_with {
            Some(reason) => Err(ProviderError::Unavailable(reason.clone())),
            None => Ok(turn.reply.clone()),
        }
    }
}
