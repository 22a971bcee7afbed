//! Schema-checked completions with bounded repair re-prompts.

use serde::de::DeserializeOwned;
use thiserror::Error;

use super::{ChatProvider, ProviderError};

/// Name and JSON shape of a payload the model is asked to return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadSchema {
    pub name: &'static str,
    pub shape: &'static str,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StructuredError {
    #[error("prompt is {chars} characters, provider accepts at most {max}")]
    InputTooLong { chars: usize, max: usize },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("model output unusable after {attempts} attempts: {violation}")]
    MalformedModelOutput { attempts: u32, violation: String },
}

/// Sends `prompt`, parses the reply as `T` and hands it to `interpret`.
///
/// A reply that does not parse, or that `interpret` rejects, triggers a
/// repair prompt quoting the violation. At most `1 + retries` calls are made.
/// Provider failures are returned immediately.
pub fn complete_structured<T, U>(
    provider: &dyn ChatProvider,
    prompt: &str,
    schema: &PayloadSchema,
    retries: u32,
    mut interpret: impl FnMut(T) -> Result<U, String>,
) -> Result<U, StructuredError>
where
    T: DeserializeOwned,
{
    let max = provider.info().max_input_chars;
    let mut violation = String::new();
    for attempt in 0..=retries {
        let current = if attempt == 0 { prompt.to_string() } else { repair_prompt(prompt, schema, &violation) };
        let chars = current.chars().count();
        if chars > max {
            return Err(StructuredError::InputTooLong { chars, max });
        }
        let reply = provider.complete(&current, Some(schema.shape))?;
        match parse_payload::<T>(&reply, schema) {
            Ok(payload) => match interpret(payload) {
                Ok(out) => return Ok(out),
                Err(v) => violation = v,
            },
            Err(v) => violation = v,
        }
        tracing::debug!(attempt, schema = schema.name, %violation, "rejected model reply");
    }
    Err(StructuredError::MalformedModelOutput { attempts: retries + 1, violation })
}

pub fn repair_prompt(prompt: &str, schema: &PayloadSchema, violation: &str) -> String {
    format!(
        "{prompt}\n\nYour previous reply was rejected: {violation}\n\
         Reply again with only a JSON object of this shape:\n{}",
        schema.shape
    )
}

/// Pulls the outermost JSON object out of a reply, tolerating code fences or
/// prose around it, and parses it strictly into `T`.
pub fn parse_payload<T: DeserializeOwned>(reply: &str, schema: &PayloadSchema) -> Result<T, String> {
    let start = reply.find('{');
    let end = reply.rfind('}');
    let body = match (start, end) {
        (Some(s), Some(e)) if s < e => &reply[s..=e],
        _ => return Err(format!("reply contains no JSON object for `{}`", schema.name)),
    };
    serde_json::from_str(body).map_err(|e| format!("reply is not a valid `{}` payload: {e}", schema.name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::scripted::{ScriptedChat, TranscriptTurn};
    use serde::Deserialize;

    #[derive(Debug, Deserialize, PartialEq)]
    struct Answer {
        value: u32,
    }

    const SCHEMA: PayloadSchema = PayloadSchema { name: "answer", shape: r#"{"value": <integer>}"# };

    fn ok(value: Answer) -> Result<u32, String> {
        Ok(value.value)
    }

    #[test]
    fn valid_first_reply_uses_one_call() {
        let chat = ScriptedChat::from_replies([r#"{"value": 7}"#]);
        assert_eq!(complete_structured(&chat, "q", &SCHEMA, 2, ok).unwrap(), 7);
        assert_eq!(chat.calls(), 1);
    }

    #[test]
    fn invalid_then_valid_uses_two_calls() {
        let chat = ScriptedChat::new(vec![
            TranscriptTurn::reply("no idea"),
            TranscriptTurn::expecting(&["previous reply was rejected"], "```json\n{\"value\": 3}\n```"),
        ]);
        assert_eq!(complete_structured(&chat, "q", &SCHEMA, 2, ok).unwrap(), 3);
        assert_eq!(chat.calls(), 2);
    }

    #[test]
    fn retries_are_bounded() {
        let chat = ScriptedChat::from_replies(["x", "y", "z", "{\"value\": 1}"]);
        let err = complete_structured(&chat, "q", &SCHEMA, 2, ok).unwrap_err();
        assert!(matches!(err, StructuredError::MalformedModelOutput { attempts: 3, .. }));
        assert_eq!(chat.calls(), 3);
    }

    #[test]
    fn interpret_rejection_triggers_repair() {
        let chat = ScriptedChat::from_replies([r#"{"value": 0}"#, r#"{"value": 5}"#]);
        let positive = |a: Answer| if a.value == 0 { Err("value must be positive".to_string()) } else { Ok(a.value) };
        assert_eq!(complete_structured(&chat, "q", &SCHEMA, 1, positive).unwrap(), 5);
        assert!(chat.prompts()[1].contains("value must be positive"));
    }

    #[test]
    fn provider_errors_are_not_retried() {
        let chat = ScriptedChat::new(vec![TranscriptTurn::failing("timeout"), TranscriptTurn::reply("{\"value\": 1}")]);
        let err = complete_structured(&chat, "q", &SCHEMA, 2, ok).unwrap_err();
        assert!(matches!(err, StructuredError::Provider(ProviderError::Unavailable(_))));
        assert_eq!(chat.calls(), 1);
    }

    #[test]
    fn overlong_prompt_is_refused_before_calling() {
        let chat = ScriptedChat::from_replies(["{\"value\": 1}"]).with_max_input_chars(4);
        let err = complete_structured(&chat, "too long", &SCHEMA, 2, ok).unwrap_err();
        assert_eq!(err, StructuredError::InputTooLong { chars: 8, max: 4 });
        assert_eq!(chat.calls(), 0);
    }

    #[test]
    fn extra_fields_are_ignored() {
        let parsed: Answer = parse_payload(r#"Sure! {"value": 2, "note": "x"} Hope that helps"#, &SCHEMA).unwrap();
        assert_eq!(parsed, Answer { value: 2 });
        assert!(parse_payload::<Answer>(r#"{"val": 2}"#, &SCHEMA).is_err());
    }
}
