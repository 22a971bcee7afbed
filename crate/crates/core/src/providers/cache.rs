use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use super::{check_embeddings, EmbeddingInfo, EmbeddingProvider, ProviderError, Reachability};
use crate::embedding::{Space, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum EvictionPolicy {
    #[default]
    Unbounded,
    /// Oldest insertion is evicted once `capacity` entries are held.
    Fifo { capacity: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub model_id: String,
    pub space: Space,
    pub text_hash: String,
}

impl CacheKey {
    pub fn new(model_id: &str, space: Space, text: &str) -> Self {
        Self { model_id: model_id.to_string(), space, text_hash: text_hash(text) }
    }
}

/// SHA-256 of the NFC-normalized text, hex encoded.
pub fn text_hash(text: &str) -> String {
    let normalized: String = text.nfc().collect();
    Sha256::digest(normalized.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Default)]
struct Entries {
    map: HashMap<CacheKey, Vector>,
    order: VecDeque<CacheKey>,
}

/// Shared embedding cache. Reads run concurrently; writes are serialized.
pub struct EmbeddingCache {
    policy: EvictionPolicy,
    entries: RwLock<Entries>,
}

impl Default for EmbeddingCache {
    fn default() -> Self {
        Self::new(EvictionPolicy::Unbounded)
    }
}

impl EmbeddingCache {
    pub fn new(policy: EvictionPolicy) -> Self {
        Self { policy, entries: RwLock::new(Entries::default()) }
    }

    pub fn policy(&self) -> EvictionPolicy {
        self.policy
    }

    pub fn get(&self, key: &CacheKey) -> Option<Vector> {
        self.entries.read().expect("cache lock poisoned").map.get(key).cloned()
    }

    pub fn insert(&self, key: CacheKey, vector: Vector) {
        let mut entries = self.entries.write().expect("cache lock poisoned");
        if entries.map.insert(key.clone(), vector).is_none() {
            entries.order.push_back(key);
        }
        if let EvictionPolicy::Fifo { capacity } = self.policy {
            while entries.map.len() > capacity.max(1) {
                match entries.order.pop_front() {
                    Some(old) => {
                        entries.map.remove(&old);
                    }
                    None => break,
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Embeds `texts` through the cache: hits are served locally, distinct
/// misses go to the provider in one batch, and output keeps input order.
pub fn embed_cached(
    provider: &dyn EmbeddingProvider,
    cache: &EmbeddingCache,
    texts: &[String],
) -> Result<Vec<Vector>, ProviderError> {
    let info = provider.info();
    let keys: Vec<CacheKey> = texts.iter().map(|t| CacheKey::new(&info.model_id, info.space, t)).collect();

    let mut found: Vec<Option<Vector>> = keys.iter().map(|k| cache.get(k)).collect();
    let mut queued = HashSet::new();
    let mut misses = Vec::new();
    for (i, key) in keys.iter().enumerate() {
        if found[i].is_none() && queued.insert(key.clone()) {
            misses.push(i);
        }
    }

    if !misses.is_empty() {
        let batch: Vec<String> = misses.iter().map(|&i| texts[i].clone()).collect();
        let fetched = provider.embed(&batch)?;
        check_embeddings(info, batch.len(), &fetched)?;
        let mut fresh = HashMap::new();
        for (&i, v) in misses.iter().zip(fetched) {
            cache.insert(keys[i].clone(), v.clone());
            fresh.insert(keys[i].clone(), v);
        }
        for (slot, key) in found.iter_mut().zip(&keys) {
            if slot.is_none() {
                *slot = fresh.get(key).cloned();
            }
        }
    }

    found
        .into_iter()
        .map(|v| v.ok_or_else(|| ProviderError::Protocol("cache lost a freshly fetched vector".into())))
        .collect()
}

/// An [`EmbeddingProvider`] that routes every call through a shared cache.
#[derive(Clone)]
pub struct CachedEmbedder {
    inner: Arc<dyn EmbeddingProvider>,
    cache: Arc<EmbeddingCache>,
}

impl CachedEmbedder {
    pub fn new(inner: Arc<dyn EmbeddingProvider>, cache: Arc<EmbeddingCache>) -> Self {
        Self { inner, cache }
    }

    pub fn inner(&self) -> &Arc<dyn EmbeddingProvider> {
        &self.inner
    }

    pub fn cache(&self) -> &Arc<EmbeddingCache> {
        &self.cache
    }

    /// Same cache, different underlying provider handle.
    pub fn with_inner(&self, inner: Arc<dyn EmbeddingProvider>) -> Self {
        Self { inner, cache: self.cache.clone() }
    }
}

impl EmbeddingProvider for CachedEmbedder {
    fn info(&self) -> &EmbeddingInfo {
        self.inner.info()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>, ProviderError> {
        embed_cached(self.inner.as_ref(), &self.cache, texts)
    }

    fn reachability(&self) -> Reachability {
        self.inner.reachability()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::mock::{MarkerStyleEmbedder, RecordingEmbedder};
    use proptest::prelude::*;

    fn texts(ts: &[&str]) -> Vec<String> {
        ts.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn identical_texts_are_fetched_once() {
        let provider = RecordingEmbedder::new(MarkerStyleEmbedder::new(16));
        let cache = EmbeddingCache::default();
        let out = embed_cached(&provider, &cache, &texts(&["hey there", "hey there"])).unwrap();
        assert_eq!(out[0], out[1]);
        assert_eq!(provider.batches(), vec![texts(&["hey there"])]);
    }

    #[test]
    fn warm_cache_makes_no_calls() {
        let provider = RecordingEmbedder::new(MarkerStyleEmbedder::new(16));
        let cache = EmbeddingCache::default();
        embed_cached(&provider, &cache, &texts(&["Dear Sir"])).unwrap();
        embed_cached(&provider, &cache, &texts(&["Dear Sir"])).unwrap();
        assert_eq!(provider.batches().len(), 1);
    }

    #[test]
    fn mixed_batch_fetches_only_misses_in_order() {
        let provider = RecordingEmbedder::new(MarkerStyleEmbedder::new(16));
        let cache = EmbeddingCache::default();
        embed_cached(&provider, &cache, &texts(&["b"])).unwrap();
        let out = embed_cached(&provider, &cache, &texts(&["a hey", "b", "c sorry"])).unwrap();
        assert_eq!(provider.batches()[1], texts(&["a hey", "c sorry"]));
        let direct = MarkerStyleEmbedder::new(16).embed(&texts(&["a hey", "b", "c sorry"])).unwrap();
        assert_eq!(out, direct);
    }

    #[test]
    fn nfc_equivalent_texts_share_a_key() {
        let composed = "caf\u{e9}";
        let decomposed = "cafe\u{301}";
        assert_eq!(text_hash(composed), text_hash(decomposed));
        assert_ne!(text_hash("a"), text_hash("b"));
    }

    #[test]
    fn fifo_eviction_drops_oldest() {
        let cache = EmbeddingCache::new(EvictionPolicy::Fifo { capacity: 2 });
        let v = Vector::style(vec![1.0]).unwrap();
        for t in ["a", "b", "c"] {
            cache.insert(CacheKey::new("m", Space::Style, t), v.clone());
        }
        assert_eq!(cache.len(), 2);
        assert!(cache.get(&CacheKey::new("m", Space::Style, "a")).is_none());
        assert!(cache.get(&CacheKey::new("m", Space::Style, "c")).is_some());
    }

    proptest! {
        #[test]
        fn cache_is_transparent(batch1 in proptest::collection::vec("[a-z ]{0,12}|hey|sorry|dear", 1..6),
                                batch2 in proptest::collection::vec("[a-z ]{0,12}|hey|sorry|dear", 1..6)) {
            let direct = MarkerStyleEmbedder::new(12);
            let cached = CachedEmbedder::new(Arc::new(MarkerStyleEmbedder::new(12)), Arc::new(EmbeddingCache::default()));
            for batch in [&batch1, &batch2] {
                prop_assert_eq!(cached.embed(batch).unwrap(), direct.embed(batch).unwrap());
            }
        }
    }
}
