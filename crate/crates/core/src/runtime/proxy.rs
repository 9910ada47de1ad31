//! The on-device proxy: runtime URL Map plus a wait-flagged response cache.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::app_ir::UrlId;
use crate::instrument::{Hints, RewriteRule};
use crate::string_analysis::{UrlMap, UrlPartState};

use super::log::ServedFrom;
use super::RuntimeError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CacheEntry {
    /// Wait flag set: a prefetch is in flight and lands at `ready_at`.
    Waiting {
        ready_at: u64,
        payload: String,
    },
    Ready {
        payload: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssuedPrefetch {
    pub url_id: UrlId,
    pub url: String,
    pub issued_at: u64,
    pub ready_at: u64,
}

/// What one `trigger_prefetch` call did with each URL it was handed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TriggerOutcome {
    pub issued: Vec<IssuedPrefetch>,
    pub skipped_known_cached: Vec<UrlId>,
    pub skipped_unknown: Vec<UrlId>,
    pub skipped_threshold: Vec<UrlId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Served {
    pub payload: String,
    pub served_from: ServedFrom,
    pub response_time_ms: u64,
}

#[derive(Debug, Clone)]
pub struct ProxyState {
    url_map: BTreeMap<UrlId, Vec<Option<String>>>,
    /// Whole-URL values supplied as developer hints; these win over the part list.
    pinned: BTreeMap<UrlId, String>,
    cache: BTreeMap<String, CacheEntry>,
    arrivals: BinaryHeap<Reverse<(u64, u64, String)>>,
    seq: u64,
    threshold: usize,
}

impl ProxyState {
    /// Seeds the runtime URL Map with the statically known parts.
    pub fn new(seed: &UrlMap, hints: Option<&Hints>, threshold: usize) -> Self {
        let url_map = seed
            .entries
            .iter()
            .map(|(url, parts)| {
                let values = parts
                    .iter()
                    .map(|p| match p {
                        UrlPartState::Concrete(s) => Some(s.clone()),
                        UrlPartState::Unknown(_) => None,
                    })
                    .collect();
                (url.clone(), values)
            })
            .collect();
        ProxyState {
            url_map,
            pinned: hints
                .map(|h| h.extra_static_urls.clone())
                .unwrap_or_default(),
            cache: BTreeMap::new(),
            arrivals: BinaryHeap::new(),
            seq: 0,
            threshold,
        }
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    /// Prefetches still on the wire.
    pub fn in_flight(&self) -> usize {
        self.cache
            .values()
            .filter(|e| matches!(e, CacheEntry::Waiting { .. }))
            .count()
    }

    pub fn cache_entry(&self, url: &str) -> Option<&CacheEntry> {
        self.cache.get(url)
    }

    pub fn part_values(&self, url_id: &str) -> Option<&[Option<String>]> {
        self.url_map.get(url_id).map(Vec::as_slice)
    }

    /// Delivers every prefetch response that has arrived by `now`.
    pub fn advance(&mut self, now: u64) {
        while let Some(Reverse((ready_at, _, _))) = self.arrivals.peek() {
            if *ready_at > now {
                break;
            }
            let Reverse((_, _, url)) = self.arrivals.pop().expect("peeked");
            self.unwait(&url);
        }
    }

    fn unwait(&mut self, url: &str) {
        if let Some(CacheEntry::Waiting { payload, .. }) = self.cache.get(url) {
            let payload = payload.clone();
            self.cache
                .insert(url.to_string(), CacheEntry::Ready { payload });
        }
    }

    /// Concrete URL if every part is known.
    pub fn resolved_url(&self, url_id: &str) -> Option<String> {
        if let Some(pinned) = self.pinned.get(url_id) {
            return Some(pinned.clone());
        }
        let parts = self.url_map.get(url_id)?;
        parts
            .iter()
            .map(|p| p.as_deref())
            .collect::<Option<Vec<_>>>()
            .map(|v| v.concat())
    }

    /// Stores the runtime value of part `m` of `url_id`, after rewrite rules. Last write wins.
    pub fn on_send_definition(
        &mut self,
        url_id: &str,
        m: usize,
        value: &str,
        rules: &[RewriteRule],
    ) -> Result<String, RuntimeError> {
        let slot = self
            .url_map
            .get_mut(url_id)
            .and_then(|parts| parts.get_mut(m.wrapping_sub(1)))
            .ok_or_else(|| RuntimeError::UnknownPart {
                url: url_id.to_string(),
                m,
            })?;
        let value = rules
            .iter()
            .filter(|r| r.url == url_id && r.m == m)
            .fold(value.to_string(), |v, r| v.replace(&r.find, &r.replace));
        *slot = Some(value.clone());
        Ok(value)
    }

    /// Prefetches every known, uncached URL in `url_ids`, up to the threshold.
    ///
    /// `fetch` gives the network latency and origin payload for a concrete URL.
    pub fn on_trigger_prefetch(
        &mut self,
        url_ids: &[UrlId],
        now: u64,
        mut fetch: impl FnMut(&str, &str) -> (u64, String),
    ) -> TriggerOutcome {
        self.advance(now);
        let mut out = TriggerOutcome::default();
        for url_id in url_ids {
            let Some(url) = self.resolved_url(url_id) else {
                out.skipped_unknown.push(url_id.clone());
                continue;
            };
            if self.cache.contains_key(&url) {
                out.skipped_known_cached.push(url_id.clone());
                continue;
            }
            if out.issued.len() >= self.threshold {
                out.skipped_threshold.push(url_id.clone());
                continue;
            }
            let (latency, payload) = fetch(url_id, &url);
            let ready_at = now + latency;
            self.cache
                .insert(url.clone(), CacheEntry::Waiting { ready_at, payload });
            self.seq += 1;
            self.arrivals
                .push(Reverse((ready_at, self.seq, url.clone())));
            out.issued.push(IssuedPrefetch {
                url_id: url_id.clone(),
                url,
                issued_at: now,
                ready_at,
            });
        }
        // Zero-latency prefetches land immediately.
        self.advance(now);
        out
    }

    /// Serves an on-demand request: cache hit, wait on an in-flight prefetch, or origin.
    ///
    /// `origin` gives the latency and payload of an on-demand fetch with the original method.
    pub fn on_fetch_from_proxy(
        &mut self,
        url: &str,
        now: u64,
        origin: impl FnOnce() -> (u64, String),
    ) -> Served {
        self.advance(now);
        match self.cache.get(url).cloned() {
            Some(CacheEntry::Ready { payload }) => Served {
                payload,
                served_from: ServedFrom::Cache,
                response_time_ms: 0,
            },
            Some(CacheEntry::Waiting { ready_at, payload }) => {
                let waited = ready_at - now;
                self.advance(ready_at);
                Served {
                    payload,
                    served_from: ServedFrom::WaitedMs(waited),
                    response_time_ms: waited,
                }
            }
            None => {
                let (latency, payload) = origin();
                self.cache.insert(
                    url.to_string(),
                    CacheEntry::Ready {
                        payload: payload.clone(),
                    },
                );
                Served {
                    payload,
                    served_from: ServedFrom::Origin,
                    response_time_ms: latency,
                }
            }
        }
    }
}
