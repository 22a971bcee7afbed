//! HTTP adapters for OpenAI-compatible chat-completion and embedding APIs.
//!
//! Transport failures, 429 and 5xx responses are retried with jittered
//! exponential backoff (base 250 ms, factor 2, at most 3 attempts). Other
//! non-success statuses fail immediately.

use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatInfo, ChatProvider, EmbeddingInfo, EmbeddingProvider, ProviderError, Reachability};
use crate::embedding::{Space, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    pub base: Duration,
    pub factor: u32,
    pub max_attempts: u32,
}

impl Default for Backoff {
    fn default() -> Self {
        Self { base: Duration::from_millis(250), factor: 2, max_attempts: 3 }
    }
}

impl Backoff {
    /// Delay before retry number `retry` (0-based): half the nominal
    /// `base * factor^retry` plus a uniform draw over the other half.
    pub fn delay(&self, retry: u32, rng: &mut impl Rng) -> Duration {
        let nominal = self.base.saturating_mul(self.factor.saturating_pow(retry));
        let half = nominal / 2;
        let jitter_ms = rng.random_range(0..=half.as_millis() as u64);
        half + Duration::from_millis(jitter_ms)
    }
}

/// Endpoint settings shared by both adapters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    pub url: String,
    pub model_id: String,
    /// Name of the environment variable holding a bearer token.
    pub auth_token_env: Option<String>,
    pub timeout_ms: u64,
}

struct Client {
    endpoint: Endpoint,
    agent: ureq::Agent,
    backoff: Backoff,
}

impl Client {
    fn new(endpoint: Endpoint, backoff: Backoff) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(endpoint.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { endpoint, agent, backoff }
    }

    fn post(&self, body: &Value) -> Result<Value, ProviderError> {
        let token = match &self.endpoint.auth_token_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| ProviderError::Unavailable(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let mut rng = rand::rng();
        let mut last_error = String::new();
        for attempt in 0..self.backoff.max_attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff.delay(attempt - 1, &mut rng));
            }
            let mut request = self.agent.post(&self.endpoint.url).header("Content-Type", "application/json");
            if let Some(token) = &token {
                request = request.header("Authorization", format!("Bearer {token}"));
            }
            match request.send_json(body) {
                Ok(mut response) => {
                    let status = response.status().as_u16();
                    if (200..300).contains(&status) {
                        return response
                            .body_mut()
                            .read_json::<Value>()
                            .map_err(|e| ProviderError::Protocol(format!("response body is not JSON: {e}")));
                    }
                    let text = response.body_mut().read_to_string().unwrap_or_default();
                    if status == 429 || status >= 500 {
                        last_error = format!("status {status}: {text}");
                        continue;
                    }
                    return Err(ProviderError::Rejected { status, body: text });
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(ProviderError::Unavailable(format!(
            "{} after {} attempts: {last_error}",
            self.endpoint.url, self.backoff.max_attempts
        )))
    }

    /// TCP connect to the endpoint host, without sending a request.
    fn probe(&self) -> Reachability {
        let uri: ureq::http::Uri = match self.endpoint.url.parse() {
            Ok(u) => u,
            Err(e) => return Reachability { reachable: false, detail: format!("bad endpoint url: {e}") },
        };
        let Some(host) = uri.host() else {
            return Reachability { reachable: false, detail: "endpoint url has no host".into() };
        };
        let port = uri.port_u16().unwrap_or(if uri.scheme_str() == Some("https") { 443 } else { 80 });
        let addrs = match (host, port).to_socket_addrs() {
            Ok(a) => a.collect::<Vec<_>>(),
            Err(e) => return Reachability { reachable: false, detail: format!("cannot resolve {host}: {e}") },
        };
        let timeout = Duration::from_millis(self.endpoint.timeout_ms.min(1000));
        for addr in &addrs {
            if TcpStream::connect_timeout(addr, timeout).is_ok() {
                return Reachability { reachable: true, detail: format!("connected to {addr}") };
            }
        }
        Reachability { reachable: false, detail: format!("cannot connect to {host}:{port}") }
    }
}

pub struct HttpChatProvider {
    info: ChatInfo,
    client: Client,
}

impl HttpChatProvider {
    pub fn new(endpoint: Endpoint, max_input_chars: usize) -> Self {
        Self::with_backoff(endpoint, max_input_chars, Backoff::default())
    }

    pub fn with_backoff(endpoint: Endpoint, max_input_chars: usize, backoff: Backoff) -> Self {
        Self {
            info: ChatInfo { model_id: endpoint.model_id.clone(), max_input_chars },
            client: Client::new(endpoint, backoff),
        }
    }
}

impl ChatProvider for HttpChatProvider {
    fn info(&self) -> &ChatInfo {
        &self.info
    }

    fn complete(&self, prompt: &str, schema_hint: Option<&str>) -> Result<String, ProviderError> {
        let mut body = json!({
            "model": self.info.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        });
        if schema_hint.is_some() {
            body["response_format"] = json!({"type": "json_object"});
        }
        let reply = self.client.post(&body)?;
        reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Protocol("reply has no choices[0].message.content".into()))
    }

    fn reachability(&self) -> Reachability {
        self.client.probe()
    }
}

pub struct HttpEmbeddingProvider {
    info: EmbeddingInfo,
    client: Client,
}

impl HttpEmbeddingProvider {
    pub fn new(endpoint: Endpoint, space: Space, dim: usize) -> Self {
        Self::with_backoff(endpoint, space, dim, Backoff::default())
    }

    pub fn with_backoff(endpoint: Endpoint, space: Space, dim: usize, backoff: Backoff) -> Self {
        Self {
            info: EmbeddingInfo { model_id: endpoint.model_id.clone(), space, dim },
            client: Client::new(endpoint, backoff),
        }
    }
}

#[derive(Deserialize)]
struct EmbeddingReply {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn info(&self) -> &EmbeddingInfo {
        &self.info
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>, ProviderError> {
        let body = json!({"model": self.info.model_id, "input": texts});
        let reply: EmbeddingReply = serde_json::from_value(self.client.post(&body)?)
            .map_err(|e| ProviderError::Protocol(format!("unexpected embedding reply: {e}")))?;
        let mut data = reply.data;
        data.sort_by_key(|d| d.index);
        data.into_iter()
            .map(|d| Vector::new(self.info.space, d.embedding).map_err(|e| ProviderError::Protocol(e.to_string())))
            .collect()
    }

    fn reachability(&self) -> Reachability {
        self.client.probe()
    }
}
