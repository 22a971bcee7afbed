//! Provider wrappers: a global in-flight limiter and per-request call meters.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use super::{ChatInfo, ChatProvider, EmbeddingInfo, EmbeddingProvider, ProviderError, Reachability};
use crate::embedding::Vector;

pub const DEFAULT_CONCURRENCY_LIMIT: usize = 4;

/// Counting semaphore bounding concurrent provider calls.
pub struct InFlightLimiter {
    max: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a> {
    limiter: &'a InFlightLimiter,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut active = self.limiter.active.lock().expect("limiter lock poisoned");
        *active -= 1;
        self.limiter.freed.notify_one();
    }
}

impl InFlightLimiter {
    pub fn new(max: usize) -> Self {
        Self { max: max.max(1), active: Mutex::new(0), freed: Condvar::new() }
    }

    pub fn max(&self) -> usize {
        self.max
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut active = self.active.lock().expect("limiter lock poisoned");
        while *active >= self.max {
            active = self.freed.wait(active).expect("limiter lock poisoned");
        }
        *active += 1;
        Permit { limiter: self }
    }

    pub fn in_flight(&self) -> usize {
        *self.active.lock().expect("limiter lock poisoned")
    }
}

/// Runs every call of `P` under a shared [`InFlightLimiter`].
pub struct Limited<P> {
    inner: P,
    limiter: Arc<InFlightLimiter>,
}

impl<P> Limited<P> {
    pub fn new(inner: P, limiter: Arc<InFlightLimiter>) -> Self {
        Self { inner, limiter }
    }
}

impl<P: ChatProvider> ChatProvider for Limited<P> {
    fn info(&self) -> &ChatInfo {
        self.inner.info()
    }

    fn complete(&self, prompt: &str, schema_hint: Option<&str>) -> Result<String, ProviderError> {
        let _permit = self.limiter.acquire();
        self.inner.complete(prompt, schema_hint)
    }

    fn reachability(&self) -> Reachability {
        self.inner.reachability()
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for Limited<P> {
    fn info(&self) -> &EmbeddingInfo {
        self.inner.info()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>, ProviderError> {
        let _permit = self.limiter.acquire();
        self.inner.embed(texts)
    }

    fn reachability(&self) -> Reachability {
        self.inner.reachability()
    }
}

/// Counts provider calls made on behalf of one request.
#[derive(Debug, Default)]
pub struct CallMeter(AtomicUsize);

impl CallMeter {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn calls(&self) -> usize {
        self.0.load(Ordering::Relaxed)
    }

    fn tick(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }
}

pub struct Metered<P> {
    inner: P,
    meter: Arc<CallMeter>,
}

impl<P> Metered<P> {
    pub fn new(inner: P, meter: Arc<CallMeter>) -> Self {
        Self { inner, meter }
    }
}

impl<P: ChatProvider> ChatProvider for Metered<P> {
    fn info(&self) -> &ChatInfo {
        self.inner.info()
    }

    fn complete(&self, prompt: &str, schema_hint: Option<&str>) -> Result<String, ProviderError> {
        self.meter.tick();
        self.inner.complete(prompt, schema_hint)
    }

    fn reachability(&self) -> Reachability {
        self.inner.reachability()
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for Metered<P> {
    fn info(&self) -> &EmbeddingInfo {
        self.inner.info()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>, ProviderError> {
        self.meter.tick();
        self.inner.embed(texts)
    }

    fn reachability(&self) -> Reachability {
        self.inner.reachability()
    }
}
