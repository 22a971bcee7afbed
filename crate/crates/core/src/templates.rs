//! Versioned prompt templates with `{name}` placeholders.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::{Captures, Regex};
use thiserror::Error;

pub const TEMPLATE_VERSION: &str = "v1";

pub const DETECT_TEMPLATE: &str = include_str!("../templates/detect.v1.txt");
pub const REWRITE_TEMPLATE: &str = include_str!("../templates/rewrite.v1.txt");
pub const NATIVE_TEMPLATE: &str = include_str!("../templates/native.v1.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template placeholder {{{0}}} has no value")]
    MissingValue(String),
}

fn placeholder() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z_]+)\}").expect("placeholder pattern compiles"))
}

/// Substitutes every `{name}` in `template`. Substituted values are not
/// scanned again, so user text containing braces is inserted verbatim.
pub fn render(template: &str, vars: &[(&str, &str)]) -> Result<String, TemplateError> {
    let values: HashMap<&str, &str> = vars.iter().copied().collect();
    let mut missing = None;
    let out = placeholder().replace_all(template, |caps: &Captures| match values.get(&caps[1]) {
        Some(v) => v.to_string(),
        None => {
            missing.get_or_insert_with(|| caps[1].to_string());
            String::new()
        }
    });
    match missing {
        Some(name) => Err(TemplateError::MissingValue(name)),
        None => Ok(out.into_owned()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_named_placeholders_once() {
        let out = render("Hi {name}, {name}! {\"json\": 1}", &[("name", "{name}")]).unwrap();
        assert_eq!(out, "Hi {name}, {name}! {\"json\": 1}");
    }

    #[test]
    fn missing_values_are_reported() {
        assert_eq!(render("{a} {b}", &[("a", "x")]), Err(TemplateError::MissingValue("b".into())));
    }

    #[test]
    fn rewrite_template_has_required_placeholders() {
        for name in ["{draft}", "{granularity}", "{dimension_lines}", "{k}"] {
            assert!(REWRITE_TEMPLATE.contains(name), "{name}");
        }
        assert!(DETECT_TEMPLATE.contains("{dimension_lines}"));
        assert!(NATIVE_TEMPLATE.contains("{native_text}"));
    }
}
