use serde::{Deserialize, Serialize};

use crate::app_ir::UrlId;

/// Where a demanded response came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServedFrom {
    /// Prefetched and already in the cache.
    Cache,
    /// Prefetch still in flight; the demand blocked for this many milliseconds.
    WaitedMs(u64),
    /// Fetched from the origin server on demand.
    Origin,
}

impl ServedFrom {
    /// Served by a prefetch, whether or not it had to wait.
    pub fn is_hit(self) -> bool {
        matches!(self, ServedFrom::Cache | ServedFrom::WaitedMs(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Prefetch {
        url_id: UrlId,
        url: String,
        issued_at: u64,
        ready_at: u64,
    },
    Demand {
        url_id: UrlId,
        url: String,
        method: String,
        at: u64,
        served_from: ServedFrom,
        response_time_ms: u64,
        payload: String,
    },
    DefinitionUpdate {
        url_id: UrlId,
        m: usize,
        value: String,
        at: u64,
    },
    TriggerEval {
        callback: String,
        at: u64,
        considered: Vec<UrlId>,
        issued: Vec<UrlId>,
        skipped_known_cached: Vec<UrlId>,
        skipped_unknown: Vec<UrlId>,
        skipped_threshold: Vec<UrlId>,
    },
}

impl Event {
    pub fn at(&self) -> u64 {
        match self {
            Event::Prefetch { issued_at, .. } => *issued_at,
            Event::Demand { at, .. }
            | Event::DefinitionUpdate { at, .. }
            | Event::TriggerEval { at, .. } => *at,
        }
    }
}

/// Time spent in instrumentation calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Overhead {
    pub send_definition_calls: u64,
    pub send_definition_ms: u64,
    pub trigger_prefetch_calls: u64,
    pub trigger_prefetch_ms: u64,
    pub fetch_from_proxy_calls: u64,
    pub fetch_from_proxy_ms: u64,
}

impl Overhead {
    pub fn total_ms(&self) -> u64 {
        self.send_definition_ms + self.trigger_prefetch_ms + self.fetch_from_proxy_ms
    }
}

/// Full record of one session.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunLog {
    pub app: String,
    pub instrumented: bool,
    pub events: Vec<Event>,
    pub overhead: Overhead,
    /// Virtual time when the last step finished.
    pub end_ms: u64,
}

/// A demanded request, flattened out of [`Event::Demand`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandRecord<'a> {
    pub url_id: &'a str,
    pub url: &'a str,
    pub method: &'a str,
    pub at: u64,
    pub served_from: ServedFrom,
    pub response_time_ms: u64,
    pub payload: &'a str,
}

impl RunLog {
    pub fn demands(&self) -> impl Iterator<Item = DemandRecord<'_>> {
        self.events.iter().filter_map(|e| match e {
            Event::Demand {
                url_id,
                url,
                method,
                at,
                served_from,
                response_time_ms,
                payload,
            } => Some(DemandRecord {
                url_id,
                url,
                method,
                at: *at,
                served_from: *served_from,
                response_time_ms: *response_time_ms,
                payload,
            }),
            _ => None,
        })
    }

    /// `(url_id, url)` of every prefetch issued.
    pub fn prefetches(&self) -> impl Iterator<Item = (&str, &str)> {
        self.events.iter().filter_map(|e| match e {
            Event::Prefetch { url_id, url, .. } => Some((url_id.as_str(), url.as_str())),
            _ => None,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run log serializes")
    }
}
