//! Blocking HTTP client that implements [`GraphAccess`] over the wire
//! protocol.
//!
//! Node indices are assigned by the client in the order ids are first seen,
//! so they are only meaningful together with [`RemoteGraphClient::ids`].
//! Every answer is cached for the life of the client.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use ppr_core::{AccessError, Error, GraphAccess, IdMap};
use reqwest::blocking::{Client, Response};
use reqwest::{header, StatusCode, Url};
use serde::{Deserialize, Serialize};

use crate::wire::{InDegreeResponse, OutResponse};

pub const ENV_BASE: &str = "PPR_API_BASE";
pub const ENV_TOKEN: &str = "PPR_API_TOKEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Total attempts per request, including the first.
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    /// Cap on any single wait, including server-requested ones.
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            initial_backoff: Duration::from_millis(250),
            max_backoff: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Wait after the failed attempt numbered `attempt` (from 0).
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.initial_backoff.saturating_mul(factor).min(self.max_backoff)
    }
}

#[derive(Debug, Clone)]
pub struct ClientConfig {
    pub base_url: String,
    pub auth_token: Option<String>,
    pub retry: RetryPolicy,
    /// Concurrent requests issued by [`GraphAccess::prefetch`].
    pub max_in_flight: usize,
    pub timeout: Duration,
}

impl ClientConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            auth_token: None,
            retry: RetryPolicy::default(),
            max_in_flight: 8,
            timeout: Duration::from_secs(30),
        }
    }

    /// Reads `PPR_API_BASE` (required) and `PPR_API_TOKEN` (optional).
    pub fn from_env() -> Result<Self, Error> {
        let base = std::env::var(ENV_BASE)
            .map_err(|_| Error::InvalidParameter(format!("{ENV_BASE} is not set")))?;
        let mut config = Self::new(base);
        config.auth_token = std::env::var(ENV_TOKEN).ok().filter(|t| !t.is_empty());
        Ok(config)
    }
}

/// Cached answers for one node, keyed by external id in checkpoints.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CachedNode {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_neighbors: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_degree: Option<usize>,
    /// The server answered 404; the node is treated as dangling.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub missing: bool,
}

#[derive(Default)]
struct Cache {
    ids: IdMap,
    out: HashMap<usize, Arc<[usize]>>,
    in_degree: HashMap<usize, usize>,
    missing: BTreeSet<usize>,
    fetch_count: u64,
    in_degree_fetches: u64,
}

impl Cache {
    fn store_out(&mut self, u: usize, fetched: Option<Vec<String>>) -> Arc<[usize]> {
        if let Some(hit) = self.out.get(&u) {
            return Arc::clone(hit);
        }
        self.fetch_count += 1;
        let nbrs: Arc<[usize]> = match fetched {
            Some(list) => list.iter().map(|v| self.ids.intern(v)).collect(),
            None => {
                self.missing.insert(u);
                Arc::from([])
            }
        };
        self.out.insert(u, Arc::clone(&nbrs));
        nbrs
    }
}

pub struct RemoteGraphClient {
    config: ClientConfig,
    base: Url,
    http: Client,
    cache: Mutex<Cache>,
}

fn transport(node: &str, message: impl Into<String>) -> AccessError {
    AccessError::Transport { node: node.to_owned(), message: message.into() }
}

fn retry_after(resp: &Response) -> Option<Duration> {
    let secs: u64 = resp.headers().get(header::RETRY_AFTER)?.to_str().ok()?.trim().parse().ok()?;
    Some(Duration::from_secs(secs))
}

impl RemoteGraphClient {
    pub fn new(config: ClientConfig) -> Result<Self, Error> {
        let base = Url::parse(&config.base_url)
            .map_err(|e| Error::InvalidParameter(format!("bad base url {:?}: {e}", config.base_url)))?;
        if !matches!(base.scheme(), "http" | "https") || base.cannot_be_a_base() {
            return Err(Error::InvalidParameter(format!("unsupported base url {:?}", config.base_url)));
        }
        if config.retry.max_attempts == 0 || config.max_in_flight == 0 {
            return Err(Error::InvalidParameter("max_attempts and max_in_flight must be positive".into()));
        }
        let http = Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot build http client: {e}")))?;
        Ok(Self { config, base, http, cache: Mutex::new(Cache::default()) })
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    fn lock(&self) -> MutexGuard<'_, Cache> {
        self.cache.lock().expect("client cache poisoned")
    }

    /// Index for `id`, assigning one if unseen.
    pub fn intern(&self, id: &str) -> usize {
        self.lock().ids.intern(id)
    }

    pub fn ids(&self) -> IdMap {
        self.lock().ids.clone()
    }

    /// Number of `/out` requests answered (including 404s).
    pub fn fetch_count(&self) -> u64 {
        self.lock().fetch_count
    }

    pub fn in_degree_fetches(&self) -> u64 {
        self.lock().in_degree_fetches
    }

    /// Ids that answered 404.
    pub fn missing(&self) -> Vec<String> {
        let cache = self.lock();
        cache.missing.iter().filter_map(|&u| cache.ids.name(u).map(str::to_owned)).collect()
    }

    /// Cached in-degree of `u`, if already fetched.
    pub fn cached_in_degree(&self, u: usize) -> Option<usize> {
        self.lock().in_degree.get(&u).copied()
    }

    pub fn snapshot(&self) -> BTreeMap<String, CachedNode> {
        let cache = self.lock();
        let mut out: BTreeMap<String, CachedNode> = BTreeMap::new();
        let name = |u: usize| cache.ids.name(u).unwrap_or_default().to_owned();
        for (&u, nbrs) in &cache.out {
            let entry = out.entry(name(u)).or_default();
            entry.out_neighbors = Some(nbrs.iter().map(|&v| name(v)).collect());
            entry.missing = cache.missing.contains(&u);
        }
        for (&u, &d) in &cache.in_degree {
            out.entry(name(u)).or_default().in_degree = Some(d);
        }
        out
    }

    /// Loads cached answers, e.g. from a checkpoint. Existing entries win.
    pub fn restore(&self, snapshot: &BTreeMap<String, CachedNode>, fetch_count: u64) {
        let mut cache = self.lock();
        for (id, node) in snapshot {
            let u = cache.ids.intern(id);
            if let Some(nbrs) = &node.out_neighbors {
                if !cache.out.contains_key(&u) {
                    let list: Arc<[usize]> = nbrs.iter().map(|v| cache.ids.intern(v)).collect();
                    cache.out.insert(u, list);
                }
            }
            if node.missing {
                cache.missing.insert(u);
            }
            if let Some(d) = node.in_degree {
                cache.in_degree.entry(u).or_insert(d);
            }
        }
        cache.fetch_count = cache.fetch_count.max(fetch_count);
    }

    fn url(&self, id: &str, endpoint: &str) -> Url {
        let mut url = self.base.clone();
        url.path_segments_mut()
            .expect("base url validated at construction")
            .pop_if_empty()
            .extend(["v1", "nodes", id, endpoint]);
        url
    }

    /// GET with retries. `Ok(None)` means 404.
    fn get(&self, id: &str, endpoint: &str) -> Result<Option<Vec<u8>>, AccessError> {
        let url = self.url(id, endpoint);
        let policy = self.config.retry;
        let mut attempt = 0;
        loop {
            let mut req = self.http.get(url.clone());
            if let Some(token) = &self.config.auth_token {
                req = req.bearer_auth(token);
            }
            let (wait, reason) = match req.send() {
                Ok(resp) => match resp.status() {
                    s if s.is_success() => match resp.bytes() {
                        Ok(body) => return Ok(Some(body.to_vec())),
                        Err(e) => (policy.delay(attempt), format!("reading body: {e}")),
                    },
                    StatusCode::NOT_FOUND => return Ok(None),
                    StatusCode::TOO_MANY_REQUESTS => (
                        retry_after(&resp).map_or(policy.delay(attempt), |d| d.min(policy.max_backoff)),
                        "rate limited (429)".to_owned(),
                    ),
                    s if s.is_server_error() => (policy.delay(attempt), format!("server error {s}")),
                    s => return Err(transport(id, format!("unexpected status {s}"))),
                },
                Err(e) => (policy.delay(attempt), e.to_string()),
            };
            attempt += 1;
            if attempt >= policy.max_attempts {
                return Err(transport(id, format!("{reason} after {attempt} attempts")));
            }
            log::debug!("{endpoint} for {id:?}: {reason}; retrying in {wait:?}");
            std::thread::sleep(wait);
        }
    }

    fn fetch_out(&self, id: &str) -> Result<Option<Vec<String>>, AccessError> {
        let Some(body) = self.get(id, "out")? else {
            log::warn!("node {id:?} not found; treating it as dangling");
            return Ok(None);
        };
        let resp = OutResponse::parse(&body, id).map_err(|e| transport(id, e.to_string()))?;
        Ok(Some(resp.out_neighbors))
    }

    fn fetch_in_degree(&self, id: &str) -> Result<usize, AccessError> {
        let Some(body) = self.get(id, "in_degree")? else {
            log::warn!("node {id:?} not found; in-degree taken as 0");
            return Ok(0);
        };
        let resp = InDegreeResponse::parse(&body, id).map_err(|e| transport(id, e.to_string()))?;
        Ok(resp.in_degree)
    }

    fn name_of(&self, u: usize) -> Result<String, AccessError> {
        self.lock().ids.name(u).map(str::to_owned).ok_or(AccessError::OutOfRange(u))
    }

    fn neighbors(&self, u: usize) -> Result<Arc<[usize]>, AccessError> {
        if let Some(hit) = self.lock().out.get(&u) {
            return Ok(Arc::clone(hit));
        }
        let id = self.name_of(u)?;
        let fetched = self.fetch_out(&id)?;
        Ok(self.lock().store_out(u, fetched))
    }

    /// Fetches in-degrees for all of `nodes` not yet cached, concurrently.
    /// Returns the first failure, if any; successful answers are kept.
    pub fn fetch_in_degrees(&self, nodes: &[usize]) -> Result<(), AccessError> {
        let pending: Vec<(usize, String)> = {
            let cache = self.lock();
            let mut seen = BTreeSet::new();
            nodes
                .iter()
                .filter(|&&u| !cache.in_degree.contains_key(&u) && seen.insert(u))
                .map(|&u| cache.ids.name(u).map(|n| (u, n.to_owned())).ok_or(AccessError::OutOfRange(u)))
                .collect::<Result<_, _>>()?
        };
        let mut first_error = None;
        for chunk in pending.chunks(self.config.max_in_flight) {
            let answers: Vec<Result<usize, AccessError>> = std::thread::scope(|s| {
                let handles: Vec<_> =
                    chunk.iter().map(|(_, id)| s.spawn(|| self.fetch_in_degree(id))).collect();
                handles.into_iter().map(|h| h.join().expect("fetch thread panicked")).collect()
            });
            let mut cache = self.lock();
            for ((u, _), answer) in chunk.iter().zip(answers) {
                match answer {
                    Ok(d) => {
                        cache.in_degree_fetches += 1;
                        cache.in_degree.insert(*u, d);
                    }
                    Err(e) => {
                        first_error.get_or_insert(e);
                    }
                }
            }
        }
        first_error.map_or(Ok(()), Err)
    }
}

impl GraphAccess for RemoteGraphClient {
    fn out_neighbors(&self, u: usize) -> Result<Cow<'_, [usize]>, AccessError> {
        Ok(Cow::Owned(self.neighbors(u)?.to_vec()))
    }

    fn out_degree(&self, u: usize) -> Result<usize, AccessError> {
        Ok(self.neighbors(u)?.len())
    }

    fn in_degree(&self, u: usize) -> Result<usize, AccessError> {
        if let Some(d) = self.cached_in_degree(u) {
            return Ok(d);
        }
        self.fetch_in_degrees(&[u])?;
        self.cached_in_degree(u).ok_or(AccessError::OutOfRange(u))
    }

    /// Fetches uncached out-lists concurrently, at most `max_in_flight` at a
    /// time. Failures are left for the subsequent sequential query to report.
    fn prefetch(&self, nodes: &[usize]) {
        let pending: Vec<(usize, String)> = {
            let cache = self.lock();
            let mut seen = BTreeSet::new();
            nodes
                .iter()
                .filter(|&&u| !cache.out.contains_key(&u) && seen.insert(u))
                .filter_map(|&u| cache.ids.name(u).map(|n| (u, n.to_owned())))
                .collect()
        };
        if pending.len() < 2 {
            return;
        }
        for chunk in pending.chunks(self.config.max_in_flight) {
            let answers: Vec<_> = std::thread::scope(|s| {
                let handles: Vec<_> = chunk.iter().map(|(_, id)| s.spawn(|| self.fetch_out(id))).collect();
                handles.into_iter().map(|h| h.join().expect("fetch thread panicked")).collect()
            });
            let mut cache = self.lock();
            for ((u, id), answer) in chunk.iter().zip(answers) {
                match answer {
                    Ok(fetched) => {
                        cache.store_out(*u, fetched);
                    }
                    Err(e) => log::debug!("prefetch of {id:?} failed: {e}"),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_schedule() {
        let p = RetryPolicy::default();
        let ms: Vec<u128> = (0..5).map(|a| p.delay(a).as_millis()).collect();
        assert_eq!(ms, [250, 500, 1000, 2000, 4000]);
        assert_eq!(p.delay(40), p.max_backoff);
    }

    #[test]
    fn url_encodes_ids() {
        let client = RemoteGraphClient::new(ClientConfig::new("http://example.invalid/api/")).unwrap();
        assert_eq!(
            client.url("a b/c", "out").as_str(),
            "http://example.invalid/api/v1/nodes/a%20b%2Fc/out"
        );
        assert!(RemoteGraphClient::new(ClientConfig::new("ftp://x")).is_err());
        assert!(RemoteGraphClient::new(ClientConfig::new("not a url")).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let client = RemoteGraphClient::new(ClientConfig::new("http://127.0.0.1:9")).unwrap();
        let a = client.intern("a");
        client.lock().store_out(a, Some(vec!["b".into(), "c".into()]));
        let d = client.intern("d");
        client.lock().store_out(d, None);
        client.lock().in_degree.insert(a, 4);
        let snap = client.snapshot();
        assert_eq!(snap["a"].out_neighbors.as_deref(), Some(&["b".to_owned(), "c".to_owned()][..]));
        assert!(snap["d"].missing);

        let other = RemoteGraphClient::new(ClientConfig::new("http://127.0.0.1:9")).unwrap();
        other.restore(&snap, client.fetch_count());
        assert_eq!(other.snapshot(), snap);
        assert_eq!(other.fetch_count(), 2);
        assert_eq!(other.missing(), ["d"]);
    }
}
