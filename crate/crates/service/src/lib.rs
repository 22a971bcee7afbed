//! HTTP front end: `/v1` JSON endpoints over the rewriting pipeline, with
//! per-session event logs on disk.

mod api;
pub mod store;

use std::sync::Arc;

use tokio::net::TcpListener;
use wd_core::config::ServiceConfig;
use wd_core::pipeline::Pipeline;
use wd_core::session::{Clock, IdSource, RandomIds, SystemClock};

pub use api::{router, ErrorBody, RequestLog, RequestLogSink};
pub use store::{SessionStore, StoreError};

/// Everything a request handler needs.
pub struct AppState {
    pub pipeline: Arc<Pipeline>,
    pub store: Arc<SessionStore>,
    pub clock: Arc<dyn Clock>,
    pub ids: Arc<dyn IdSource>,
    /// When set, every request log line is also pushed here.
    pub request_log: Option<RequestLogSink>,
}

impl AppState {
    pub fn new(pipeline: Pipeline, store: SessionStore) -> Self {
        Self {
            pipeline: Arc::new(pipeline),
            store: Arc::new(store),
            clock: Arc::new(SystemClock),
            ids: Arc::new(RandomIds),
            request_log: None,
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_ids(mut self, ids: Arc<dyn IdSource>) -> Self {
        self.ids = ids;
        self
    }

    pub fn with_request_log(mut self, sink: RequestLogSink) -> Self {
        self.request_log = Some(sink);
        self
    }

    pub fn from_config(cfg: &ServiceConfig) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let pipeline = Pipeline::from_config(cfg)?;
        let store = SessionStore::open(&cfg.data_dir)?;
        Ok(Self::new(pipeline, store))
    }
}

/// Binds the configured address and serves until the process is stopped.
/// The bound address is printed on stdout as `listening on http://<addr>`.
pub async fn serve(cfg: &ServiceConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let state = tokio::task::block_in_place(|| AppState::from_config(cfg))?;
    let listener = TcpListener::bind(cfg.listen_addr()?).await?;
    let addr = listener.local_addr()?;
    println!("listening on http://{addr}");
    use std::io::Write;
    std::io::stdout().flush()?;
    tracing::info!(%addr, "service started");
    axum::serve(listener, router(Arc::new(state))).await?;
    Ok(())
}
