use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use wd_core::domain::{Draft, Granularity, IntentionProfile, RewriteSuggestion};
use wd_core::pipeline::TargetSpec;
use wd_core::providers::CallMeter;
use wd_core::rewriter::{Adjustment, Diversity, RejectedCandidate, TargetProfile};
use wd_core::session::{EventPayload, SessionError};
use wd_core::{Error, ErrorClass};

use crate::store::StoreError;
use crate::AppState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected: Option<Vec<RejectedCandidate>>,
}

#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { kind: kind.into(), message: message.into(), rejected: None } }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "validation", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, kind) = match e.class() {
            ErrorClass::Validation => (StatusCode::BAD_REQUEST, "validation"),
            ErrorClass::NotFound => (StatusCode::NOT_FOUND, "not_found"),
            ErrorClass::Conflict => (StatusCode::CONFLICT, "conflict"),
            ErrorClass::Provider => (StatusCode::BAD_GATEWAY, "provider_unavailable"),
            ErrorClass::ModelOutput => (StatusCode::UNPROCESSABLE_ENTITY, "malformed_model_output"),
            ErrorClass::Rejected => (StatusCode::UNPROCESSABLE_ENTITY, "all_candidates_rejected"),
            ErrorClass::Internal => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        let mut err = ApiError::new(status, kind, e.to_string());
        err.body.rejected = e.rejections().map(<[_]>::to_vec);
        err
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        Error::from(e).into()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => Error::SessionNotFound(id).into(),
            StoreError::Session(s) => s.into(),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.body }))).into_response()
    }
}

/// Provider calls made while handling a request; read by the log layer.
#[derive(Debug, Clone, Copy)]
struct ProviderCalls(usize);

/// One line per handled request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestLog {
    pub method: String,
    pub path: String,
    pub status: u16,
    pub latency_ms: u64,
    pub provider_calls: usize,
}

impl fmt::Display for RequestLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "method={} path={} status={} latency_ms={} provider_calls={}",
            self.method, self.path, self.status, self.latency_ms, self.provider_calls
        )
    }
}

async fn log_requests(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    let method = req.method().to_string();
    let path = req.uri().path().to_string();
    let start = Instant::now();
    let response = next.run(req).await;
    let entry = RequestLog {
        method,
        path,
        status: response.status().as_u16(),
        latency_ms: start.elapsed().as_millis() as u64,
        provider_calls: response.extensions().get::<ProviderCalls>().map_or(0, |c| c.0),
    };
    tracing::info!(target: "wd_service::request", "{entry}");
    if let Some(sink) = &state.request_log {
        sink.lock().expect("request log poisoned").push(entry);
    }
    response
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/analyze", post(analyze))
        .route("/v1/rewrite", post(rewrite))
        .route("/v1/explain", post(explain))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/selection", post(select))
        .route("/v1/dimensions", get(dimensions))
        .route("/healthz", get(healthz))
        .layer(middleware::from_fn_with_state(state.clone(), log_requests))
        .with_state(state)
}

/// JSON bodies are parsed by hand so malformed input is a 400, not axum's
/// default 422.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn json_response<T: Serialize>(status: StatusCode, value: &T) -> Response {
    let bytes = serde_json::to_vec(value).expect("responses serialize");
    Response::builder()
        .status(status)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(bytes))
        .expect("valid response")
}

/// Runs `work` on the blocking pool with a fresh call meter and attaches
/// the call count to whatever response comes out.
async fn blocking<F>(state: Arc<AppState>, work: F) -> Response
where
    F: FnOnce(&AppState, &Arc<CallMeter>) -> Result<Response, ApiError> + Send + 'static,
{
    let meter = CallMeter::new();
    let m = meter.clone();
    let result = tokio::task::spawn_blocking(move || work(&state, &m)).await;
    let mut response = match result {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => e.into_response(),
        Err(join) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", join.to_string()).into_response(),
    };
    response.extensions_mut().insert(ProviderCalls(meter.calls()));
    response
}

#[derive(Serialize)]
struct AnalyzeResponse<'a> {
    session_id: &'a str,
    profile: &'a IntentionProfile,
}

async fn analyze(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let draft: Draft = match parse_body(&body) {
        Ok(d) => d,
        Err(e) => return e.into_response(),
    };
    blocking(state, move |st, meter| {
        let profile = st.pipeline.analyze(&draft, None, Some(meter))?;
        let id = st.ids.next_id();
        st.store.create(&id, st.clock.now())?;
        st.store.append(&id, EventPayload::Analyze { draft, profile: profile.clone() }, st.clock.now())?;
        Ok(json_response(StatusCode::OK, &AnalyzeResponse { session_id: &id, profile: &profile }))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RewriteBody {
    session_id: String,
    #[serde(default)]
    adjustments: Option<Vec<Adjustment>>,
    #[serde(default)]
    native_inference: bool,
    #[serde(default)]
    granularity: Option<Granularity>,
    #[serde(default)]
    k: Option<usize>,
    #[serde(default)]
    diversity: Option<Diversity>,
}

#[derive(Serialize)]
struct RewriteResponse<'a> {
    session_id: &'a str,
    targets: &'a TargetProfile,
    suggestions: &'a [RewriteSuggestion],
    rejected: &'a [RejectedCandidate],
}

async fn rewrite(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let body: RewriteBody = match parse_body(&body) {
        Ok(b) => b,
        Err(e) => return e.into_response(),
    };
    blocking(state, move |st, meter| {
        let session = st.store.get(&body.session_id)?;
        let (draft, baseline) = session.analysis().ok_or(SessionError::NoPriorAnalyze)?;
        let spec = match (body.native_inference, body.adjustments) {
            (true, Some(_)) => {
                return Err(ApiError::bad_request("give either adjustments or native_inference, not both"))
            }
            (true, None) => TargetSpec::Native,
            (false, adjustments) => TargetSpec::Adjust(adjustments.unwrap_or_default()),
        };
        let targets = st.pipeline.targets(draft, baseline, &spec, Some(meter))?;
        st.store.append(&body.session_id, EventPayload::Adjust { targets: targets.clone() }, st.clock.now())?;

        let granularity = body.granularity.unwrap_or(draft.granularity());
        let k = body.k.unwrap_or(st.pipeline.settings().k_default);
        let diversity = body.diversity.unwrap_or_default();
        let outcome =
            st.pipeline.rewrite(draft, baseline, targets, Some(granularity), Some(k), diversity, Some(meter))?;
        st.store.append(
            &body.session_id,
            EventPayload::Rewrite {
                granularity,
                k,
                diversity,
                targets: outcome.targets.clone(),
                suggestions: outcome.suggestions.clone(),
                rejected: outcome.rejected.clone(),
            },
            st.clock.now(),
        )?;
        Ok(json_response(
            StatusCode::OK,
            &RewriteResponse {
                session_id: &body.session_id,
                targets: &outcome.targets,
                suggestions: &outcome.suggestions,
                rejected: &outcome.rejected,
            },
        ))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplainBody {
    session_id: String,
}

async fn explain(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let body: ExplainBody = match parse_body(&body) {
        Ok(b) => b,
        Err(e) => return e.into_response(),
    };
    blocking(state, move |st, meter| {
        let session = st.store.get(&body.session_id)?;
        let (_, baseline) = session.analysis().ok_or(SessionError::NoPriorAnalyze)?;
        let suggestions = session.latest_suggestions().ok_or(SessionError::NoPriorRewrite)?;
        let report = st.pipeline.explain(suggestions, baseline, Some(meter))?;
        st.store.append(&body.session_id, EventPayload::Explain { report: report.clone() }, st.clock.now())?;
        Ok(json_response(StatusCode::OK, &report))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectionBody {
    rank: u32,
}

async fn select(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Response {
    let body: SelectionBody = match parse_body(&body) {
        Ok(b) => b,
        Err(e) => return e.into_response(),
    };
    blocking(state, move |st, _| {
        st.store.append(&id, EventPayload::Select { rank: body.rank }, st.clock.now())?;
        Ok(StatusCode::NO_CONTENT.into_response())
    })
    .await
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    blocking(state, move |st, _| Ok(json_response(StatusCode::OK, &st.store.get(&id)?))).await
}

async fn dimensions(State(state): State<Arc<AppState>>) -> Response {
    json_response(StatusCode::OK, state.pipeline.registry())
}

#[derive(Serialize)]
struct ProviderHealth {
    name: &'static str,
    reachable: bool,
    detail: String,
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    degraded: bool,
    providers: Vec<ProviderHealth>,
}

async fn healthz(State(state): State<Arc<AppState>>) -> Response {
    blocking(state, |st, _| {
        let providers: Vec<ProviderHealth> = st
            .pipeline
            .reachability()
            .into_iter()
            .map(|(name, r)| ProviderHealth { name, reachable: r.reachable, detail: r.detail })
            .collect();
        let degraded = providers.iter().any(|p| !p.reachable);
        let status = if degraded { "degraded" } else { "ok" };
        Ok(json_response(StatusCode::OK, &Health { status, degraded, providers }))
    })
    .await
}

/// Test hook: records every [`RequestLog`] line.
pub type RequestLogSink = Arc<Mutex<Vec<RequestLog>>>;
