//! Byte-bounded LRU cache of serialized analysis results with per-key
//! single-flight computation.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct AnalysisCacheKey {
    pub run_id: String,
    pub candidate_id: Option<String>,
    pub operation: String,
    /// SHA-256 of the canonical JSON of the parameters.
    pub param_hash: String,
}

impl AnalysisCacheKey {
    pub fn new(run_id: &str, candidate_id: Option<&str>, operation: &str, params: &impl Serialize) -> Self {
        AnalysisCacheKey {
            run_id: run_id.into(),
            candidate_id: candidate_id.map(String::from),
            operation: operation.into(),
            param_hash: param_hash(params),
        }
    }
}

/// Hash of the parameters rendered as JSON with sorted object keys.
pub fn param_hash(params: &impl Serialize) -> String {
    let canonical = serde_json::to_value(params).expect("serializable parameters");
    let bytes = serde_json::to_vec(&canonical).expect("serializable value");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Miss,
    /// Waited for a concurrent computation of the same key.
    Joined,
}

pub type Body = Arc<[u8]>;

struct Flight<E> {
    result: Mutex<Option<Result<Body, E>>>,
    done: Condvar,
}

struct Inner<E> {
    entries: HashMap<AnalysisCacheKey, (Body, u64)>,
    recency: BTreeMap<u64, AnalysisCacheKey>,
    bytes: usize,
    tick: u64,
    inflight: HashMap<AnalysisCacheKey, Arc<Flight<E>>>,
}

impl<E> Default for Inner<E> {
    fn default() -> Self {
        Inner {
            entries: HashMap::new(),
            recency: BTreeMap::new(),
            bytes: 0,
            tick: 0,
            inflight: HashMap::new(),
        }
    }
}

impl<E> Inner<E> {
    fn touch(&mut self, key: &AnalysisCacheKey) -> Option<Body> {
        self.tick += 1;
        let tick = self.tick;
        let (body, old) = self.entries.get_mut(key)?;
        self.recency.remove(old);
        *old = tick;
        let body = body.clone();
        self.recency.insert(tick, key.clone());
        Some(body)
    }
}

/// Failures of type `E` are handed to every waiter and never stored.
pub struct AnalysisCache<E = String> {
    capacity: usize,
    inner: Mutex<Inner<E>>,
    computations: AtomicU64,
    hits: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub entries: usize,
    pub bytes: usize,
    pub capacity: usize,
    pub computations: u64,
    pub hits: u64,
}

impl<E: Clone + From<String>> AnalysisCache<E> {
    pub fn new(capacity_bytes: usize) -> Self {
        AnalysisCache {
            capacity: capacity_bytes,
            inner: Mutex::new(Inner::default()),
            computations: AtomicU64::new(0),
            hits: AtomicU64::new(0),
        }
    }

    pub fn stats(&self) -> CacheStats {
        let inner = self.inner.lock().expect("cache lock");
        CacheStats {
            entries: inner.entries.len(),
            bytes: inner.bytes,
            capacity: self.capacity,
            computations: self.computations.load(Ordering::Relaxed),
            hits: self.hits.load(Ordering::Relaxed),
        }
    }

    pub fn get(&self, key: &AnalysisCacheKey) -> Option<Body> {
        self.inner.lock().expect("cache lock").touch(key)
    }

    fn insert(&self, inner: &mut Inner<E>, key: AnalysisCacheKey, body: Body) {
        if body.len() > self.capacity {
            return;
        }
        while inner.bytes + body.len() > self.capacity {
            let Some((_, oldest)) = inner.recency.pop_first() else { break };
            if let Some((b, _)) = inner.entries.remove(&oldest) {
                inner.bytes -= b.len();
            }
        }
        inner.tick += 1;
        let tick = inner.tick;
        inner.bytes += body.len();
        inner.recency.insert(tick, key.clone());
        inner.entries.insert(key, (body, tick));
    }

    /// Cached body for `key`, computing it at most once across concurrent
    /// callers.
    pub fn get_or_compute(
        &self,
        key: &AnalysisCacheKey,
        compute: impl FnOnce() -> Result<Vec<u8>, E>,
    ) -> Result<(Body, CacheStatus), E> {
        let flight = {
            let mut inner = self.inner.lock().expect("cache lock");
            if let Some(body) = inner.touch(key) {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return Ok((body, CacheStatus::Hit));
            }
            if let Some(f) = inner.inflight.get(key) {
                let f = f.clone();
                drop(inner);
                let mut slot = f.result.lock().expect("flight lock");
                while slot.is_none() {
                    slot = f.done.wait(slot).expect("flight lock");
                }
                return slot.clone().expect("result set").map(|b| (b, CacheStatus::Joined));
            }
            let f = Arc::new(Flight {
                result: Mutex::new(None),
                done: Condvar::new(),
            });
            inner.inflight.insert(key.clone(), f.clone());
            f
        };
        self.computations.fetch_add(1, Ordering::Relaxed);
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(compute));
        let result: Result<Body, E> = match outcome {
            Ok(Ok(bytes)) => Ok(Body::from(bytes)),
            Ok(Err(e)) => Err(e),
            Err(_) => Err(E::from("analysis panicked".to_string())),
        };
        {
            let mut inner = self.inner.lock().expect("cache lock");
            inner.inflight.remove(key);
            if let Ok(body) = &result {
                self.insert(&mut inner, key.clone(), body.clone());
            }
        }
        *flight.result.lock().expect("flight lock") = Some(result.clone());
        flight.done.notify_all();
        result.map(|b| (b, CacheStatus::Miss))
    }
}
