use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use wd_core::anchors::{calibrate, AnchorSet};
use wd_core::domain::DimensionRegistry;
use wd_core::pipeline::{Pipeline, Settings};
use wd_core::providers::mock::{LexicalContentEmbedder, MarkerStyleEmbedder};
use wd_core::providers::scripted::{ScriptedChat, TranscriptTurn};
use wd_core::session::{SequentialIds, StepClock};
use wd_service::{router, AppState, RequestLog, SessionStore};

const DRAFT: &str = "Dear Professor Miller,\n\nI hope this email finds you well. I am writing to inquire regarding the possibility of meeting with you to discuss my research proposal. I would appreciate any time you could spare next week.\n\nThank you for your consideration.\n\nSincerely,\nYinuo";

const WARM: &str = "Hi Professor Miller,\n\nI hope this email finds you well! Remember me from your seminar? I am writing to ask regarding the possibility of meeting with you to discuss my research proposal. I would appreciate any time you could spare next week.\n\nThank you for your consideration.\n\nBest,\nYinuo";

struct Harness {
    app: Router,
    log: Arc<Mutex<Vec<RequestLog>>>,
    _dir: tempfile::TempDir,
}

fn detection() -> TranscriptTurn {
    TranscriptTurn::expecting(
        &["formal-informal"],
        json!({"dimensions": [
            {"id": "formal-informal", "rationale": "salutation"},
            {"id": "distant-close", "rationale": "no shared context"},
        ]})
        .to_string(),
    )
}

fn candidates(texts: &[&str]) -> TranscriptTurn {
    let list: Vec<Value> = texts.iter().map(|t| json!({ "text": t })).collect();
    TranscriptTurn::reply(json!({ "candidates": list }).to_string())
}

fn harness(turns: Vec<TranscriptTurn>) -> Harness {
    let registry = DimensionRegistry::default();
    let style = MarkerStyleEmbedder::new(768);
    let (axes, _) = calibrate(&AnchorSet::builtin(), &registry, &style, 3).unwrap();
    let pipeline = Pipeline::new(
        registry,
        axes,
        Some(Arc::new(ScriptedChat::new(turns))),
        Arc::new(LexicalContentEmbedder::new(384)),
        Arc::new(style),
        Settings::default(),
        4,
    );
    let dir = tempfile::tempdir().unwrap();
    let log = Arc::new(Mutex::new(Vec::new()));
    let state = AppState::new(pipeline, SessionStore::open(dir.path()).unwrap())
        .with_clock(Arc::new(StepClock::from_unix(1_700_000_000)))
        .with_ids(Arc::new(SequentialIds::default()))
        .with_request_log(log.clone());
    Harness { app: router(Arc::new(state)), log, _dir: dir }
}

impl Harness {
    async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let body = body.map_or_else(Body::empty, |b| Body::from(b.to_string()));
        let req = Request::builder().method(method).uri(uri).header("content-type", "application/json").body(body).unwrap();
        let res = self.app.clone().oneshot(req).await.unwrap();
        let status = res.status();
        let bytes = res.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
        (status, value)
    }

    async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, uri, Some(body)).await
    }

    async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.call(Method::GET, uri, None).await
    }
}

fn kind(body: &Value) -> &str {
    body["error"]["kind"].as_str().unwrap_or_default()
}

#[tokio::test]
async fn full_session_flow() {
    let h = harness(vec![detection(), candidates(&[WARM])]);
    let (status, body) = h.post("/v1/analyze", json!({ "text": DRAFT })).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["session_id"], "s000001");
    assert_eq!(body["profile"]["entries"][0]["dimension_id"], "formal-informal");

    let (status, body) = h
        .post(
            "/v1/rewrite",
            json!({"session_id": "s000001", "adjustments": [{"dimension_id": "formal-informal", "delta": 2.0}]}),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["suggestions"][0]["rank"], 1);
    assert_eq!(body["suggestions"][0]["text"], WARM);

    let (status, report) = h.post("/v1/explain", json!({"session_id": "s000001"})).await;
    assert_eq!(status, StatusCode::OK, "{report}");
    assert_eq!(report["suggestion_count"], 1);

    let (status, _) = h.post("/v1/sessions/s000001/selection", json!({"rank": 1})).await;
    assert_eq!(status, StatusCode::NO_CONTENT);

    let (status, session) = h.get("/v1/sessions/s000001").await;
    assert_eq!(status, StatusCode::OK);
    let kinds: Vec<&str> = session["events"].as_array().unwrap().iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, vec!["analyze", "adjust", "rewrite", "explain", "select"]);
    let seqs: Vec<u64> = session["events"].as_array().unwrap().iter().map(|e| e["seq"].as_u64().unwrap()).collect();
    assert_eq!(seqs, vec![1, 2, 3, 4, 5]);
}

#[tokio::test]
async fn malformed_bodies_are_bad_requests() {
    let h = harness(vec![]);
    let (status, body) = h.post("/v1/analyze", json!({"txt": "hi"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(kind(&body), "validation");
    let (status, _) = h.post("/v1/analyze", json!({"text": "   "})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = h.post("/v1/explain", json!({"session": "x"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unknown_sessions_are_not_found() {
    let h = harness(vec![]);
    for (uri, body) in [
        ("/v1/rewrite", json!({"session_id": "nope"})),
        ("/v1/explain", json!({"session_id": "nope"})),
        ("/v1/sessions/nope/selection", json!({"rank": 1})),
    ] {
        let (status, body) = h.post(uri, body).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(kind(&body), "not_found");
    }
    assert_eq!(h.get("/v1/sessions/nope").await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn out_of_order_calls_conflict() {
    let h = harness(vec![detection()]);
    h.post("/v1/analyze", json!({ "text": DRAFT })).await;
    let (status, body) = h.post("/v1/explain", json!({"session_id": "s000001"})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(kind(&body), "conflict");
    let (status, _) = h.post("/v1/sessions/s000001/selection", json!({"rank": 1})).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn unknown_rank_is_a_validation_error() {
    let h = harness(vec![detection(), candidates(&[WARM])]);
    h.post("/v1/analyze", json!({ "text": DRAFT })).await;
    h.post("/v1/rewrite", json!({"session_id": "s000001", "adjustments": []})).await;
    let (status, body) = h.post("/v1/sessions/s000001/selection", json!({"rank": 4})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
}

#[tokio::test]
async fn adjustments_and_native_inference_are_exclusive() {
    let h = harness(vec![detection()]);
    h.post("/v1/analyze", json!({ "text": DRAFT })).await;
    let (status, _) =
        h.post("/v1/rewrite", json!({"session_id": "s000001", "adjustments": [], "native_inference": true})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    // no native text on the draft
    let (status, _) = h.post("/v1/rewrite", json!({"session_id": "s000001", "native_inference": true})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unknown_dimension_adjustment_is_rejected() {
    let h = harness(vec![detection()]);
    h.post("/v1/analyze", json!({ "text": DRAFT })).await;
    let (status, body) = h
        .post("/v1/rewrite", json!({"session_id": "s000001", "adjustments": [{"dimension_id": "shy-bold", "value": 5.0}]}))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
}

#[tokio::test]
async fn provider_outage_is_bad_gateway() {
    let h = harness(vec![TranscriptTurn::failing("connection refused")]);
    let (status, body) = h.post("/v1/analyze", json!({ "text": DRAFT })).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY, "{body}");
    assert_eq!(kind(&body), "provider_unavailable");
}

#[tokio::test]
async fn unusable_model_output_is_unprocessable() {
    let h = harness((0..3).map(|_| TranscriptTurn::reply("not json")).collect());
    let (status, body) = h.post("/v1/analyze", json!({ "text": DRAFT })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert_eq!(kind(&body), "malformed_model_output");
}

#[tokio::test]
async fn all_candidates_rejected_lists_reasons() {
    let h = harness(vec![detection(), candidates(&["Pizza toppings include cheese and basil.", "The train leaves at noon."])]);
    h.post("/v1/analyze", json!({ "text": DRAFT })).await;
    let (status, body) = h.post("/v1/rewrite", json!({"session_id": "s000001", "k": 2})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert_eq!(kind(&body), "all_candidates_rejected");
    let rejected = body["error"]["rejected"].as_array().unwrap();
    assert_eq!(rejected.len(), 2);
    assert_eq!(rejected[0]["reason"]["kind"], "content_drift");
}

#[tokio::test]
async fn dimensions_and_health() {
    let h = harness(vec![]);
    let (status, body) = h.get("/v1/dimensions").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["dimensions"].as_array().unwrap().len(), 5);
    let (status, body) = h.get("/healthz").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["providers"].as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn every_request_is_logged_with_provider_calls() {
    let h = harness(vec![detection()]);
    h.post("/v1/analyze", json!({ "text": DRAFT })).await;
    h.get("/v1/sessions/s000001").await;
    h.get("/v1/missing").await;
    let log = h.log.lock().unwrap().clone();
    assert_eq!(log.len(), 3);
    assert_eq!((log[0].method.as_str(), log[0].path.as_str(), log[0].status), ("POST", "/v1/analyze", 200));
    assert_eq!(log[0].provider_calls, 2);
    assert_eq!(log[1].provider_calls, 0);
    assert_eq!(log[2].status, 404);
    assert!(log[0].to_string().contains("provider_calls=2"));
}
