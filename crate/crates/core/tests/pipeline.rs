use std::sync::Arc;

use serde_json::json;
use wd_core::anchors::{calibrate, AnchorSet};
use wd_core::domain::{DimensionRegistry, Draft, Granularity};
use wd_core::pipeline::{Pipeline, Settings, TargetSpec};
use wd_core::providers::mock::{LexicalContentEmbedder, MarkerStyleEmbedder};
use wd_core::providers::scripted::ScriptedChat;
use wd_core::providers::{CallMeter, ChatProvider};
use wd_core::rewriter::{Adjustment, Diversity};
use wd_core::{Error, ErrorClass};

const DRAFT: &str = "Dear Professor Miller,\n\nI hope this email finds you well. I am writing to inquire regarding the possibility of meeting with you to discuss my research proposal. I would appreciate any time you could spare next week.\n\nThank you for your consideration.\n\nSincerely,\nYinuo";

const WARM: &str = "Hi Professor Miller,\n\nI hope this email finds you well! Remember me from your seminar? I am writing to ask regarding the possibility of meeting with you to discuss my research proposal. I would appreciate any time you could spare next week.\n\nThank you for your consideration.\n\nBest,\nYinuo";

const CASUAL: &str = "Hi Professor Miller,\n\nHope this email finds you well! Remember our chat after class? I'm writing to ask about the possibility of meeting with you to discuss my research proposal. I'd really appreciate any time you could spare next week.\n\nThanks so much for your consideration!\n\nBest,\nYinuo";

const BLUNT: &str = "Hi Professor Miller,\n\nI hope this email finds you well! Remember me from your seminar? I'm writing regarding the possibility of meeting with you to discuss my research proposal. Any time you could spare next week would help.\n\nThank you for your consideration.\n\nBest,\nYinuo";

fn detection_reply() -> String {
    json!({"dimensions": [
        {"id": "respectful-disrespectful", "rationale": "polite request"},
        {"id": "formal-informal", "rationale": "formal salutation"},
        {"id": "distant-close", "rationale": "no shared context"},
        {"id": "shy-bold", "rationale": "tentative ask"},
    ]})
    .to_string()
}

fn rewrite_reply() -> String {
    json!({"candidates": [{"text": CASUAL}, {"text": WARM}, {"text": BLUNT}]}).to_string()
}

fn pipeline(chat: Arc<dyn ChatProvider>) -> Pipeline {
    let registry = DimensionRegistry::default();
    let style = MarkerStyleEmbedder::new(768);
    let (axes, _) = calibrate(&AnchorSet::builtin(), &registry, &style, 3).unwrap();
    Pipeline::new(
        registry,
        axes,
        Some(chat),
        Arc::new(LexicalContentEmbedder::new(384)),
        Arc::new(style),
        Settings::default(),
        4,
    )
}

fn scores(profile: &wd_core::domain::IntentionProfile) -> Vec<(String, f64)> {
    profile.entries().iter().map(|e| (e.dimension_id.clone(), e.score.value())).collect()
}

#[test]
fn email_scenario_end_to_end() {
    let chat = Arc::new(ScriptedChat::from_replies([detection_reply(), rewrite_reply()]));
    let p = pipeline(chat.clone());
    let draft = Draft::new(DRAFT, Granularity::Paragraph).unwrap();

    let baseline = p.analyze(&draft, None, None).unwrap();
    assert_eq!(
        scores(&baseline),
        vec![
            ("respectful-disrespectful".to_string(), 1.0),
            ("formal-informal".to_string(), 1.0),
            ("distant-close".to_string(), 2.5),
            ("shy-bold".to_string(), 2.5),
        ]
    );

    let spec = TargetSpec::Adjust(vec![
        Adjustment::delta("formal-informal", 2.0),
        Adjustment::delta("distant-close", 2.0),
    ]);
    let targets = p.targets(&draft, &baseline, &spec, None).unwrap();
    assert_eq!(targets.get("formal-informal").unwrap().target.value(), 3.0);
    assert_eq!(targets.get("distant-close").unwrap().target.value(), 4.5);
    assert!(targets.get("respectful-disrespectful").unwrap().locked);

    let outcome = p.rewrite(&draft, &baseline, targets, None, Some(3), Diversity::Medium, None).unwrap();
    assert!(outcome.rejected.is_empty(), "{:?}", outcome.rejected);
    let texts: Vec<&str> = outcome.suggestions.iter().map(|s| s.text.as_str()).collect();
    assert_eq!(texts, vec![WARM, BLUNT, CASUAL]);
    let errors: Vec<f64> = outcome.suggestions.iter().map(|s| s.alignment_error).collect();
    assert_eq!(errors, vec![0.375, 1.125, 1.25]);
    for s in &outcome.suggestions {
        assert!(s.content_preservation >= 0.8, "{} {}", s.rank, s.content_preservation);
    }
    assert_eq!(chat.calls(), 2);

    let report = p.explain(&outcome.suggestions, &baseline, None).unwrap();
    assert_eq!(report.suggestion_count, 3);
    assert_eq!(report.per_suggestion.len(), 3);
    assert!(report.per_suggestion[0].note.starts_with("More informal"), "{}", report.per_suggestion[0].note);
}

#[test]
fn metered_calls_count_provider_traffic_only() {
    let chat = Arc::new(ScriptedChat::from_replies([detection_reply(), detection_reply()]));
    let p = pipeline(chat);
    let draft = Draft::new(DRAFT, Granularity::Paragraph).unwrap();
    let first = CallMeter::new();
    p.analyze(&draft, None, Some(&first)).unwrap();
    // one chat call plus one style batch
    assert_eq!(first.calls(), 2);
    let second = CallMeter::new();
    p.analyze(&draft, None, Some(&second)).unwrap();
    // style vector now cached
    assert_eq!(second.calls(), 1);
}

#[test]
fn native_inference_needs_native_text() {
    let chat = Arc::new(ScriptedChat::from_replies([detection_reply()]));
    let p = pipeline(chat);
    let draft = Draft::new(DRAFT, Granularity::Paragraph).unwrap();
    let baseline = p.analyze(&draft, None, None).unwrap();
    let err = p.targets(&draft, &baseline, &TargetSpec::Native, None).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Validation);
}

#[test]
fn native_inference_sets_unlocked_targets() {
    let native = json!({"targets": [{"id": "formal-informal", "score": 3.0}, {"id": "distant-close", "score": 5.0}]});
    let chat = Arc::new(ScriptedChat::from_replies([detection_reply(), native.to_string()]));
    let p = pipeline(chat);
    let draft = Draft::new(DRAFT, Granularity::Paragraph).unwrap().with_native("米勒教授您好", "zh").unwrap();
    let baseline = p.analyze(&draft, None, None).unwrap();
    let targets = p.targets(&draft, &baseline, &TargetSpec::Native, None).unwrap();
    assert_eq!(targets.get("formal-informal").unwrap().target.value(), 3.0);
    assert!(!targets.get("formal-informal").unwrap().locked);
    assert_eq!(targets.get("distant-close").unwrap().target.value(), 5.0);
}

#[test]
fn k_outside_bounds_is_invalid() {
    let chat = Arc::new(ScriptedChat::from_replies([detection_reply()]));
    let p = pipeline(chat);
    let draft = Draft::new(DRAFT, Granularity::Paragraph).unwrap();
    let baseline = p.analyze(&draft, None, None).unwrap();
    let targets = p.targets(&draft, &baseline, &TargetSpec::Adjust(vec![]), None).unwrap();
    let err = p.rewrite(&draft, &baseline, targets, None, Some(9), Diversity::Low, None).unwrap_err();
    assert!(matches!(err, Error::Invalid(_)));
}
