//! Callback analysis: which network method is the expensive fetch, and at the end of
//! which callbacks its URLs should be prefetched.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::app_ir::{App, Ccfg, Ecg, Stmt, UrlId};
use crate::runtime::{run_trace, NetModel, RuntimeError, Trace};
use crate::string_analysis::UrlMap;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProfileError {
    #[error("nothing to profile: the trace triggers no network call")]
    NothingToProfile,
    #[error("profiling run failed: {0}")]
    Run(#[from] RuntimeError),
}

/// The network-library method that actually issues HTTP requests in this app.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchSignature {
    pub signature: String,
}

impl FetchSignature {
    pub fn new(method: impl Into<String>) -> Self {
        FetchSignature {
            signature: method.into(),
        }
    }

    pub fn method(&self) -> &str {
        &self.signature
    }
}

/// Trigger Callback → URLs to prefetch at its end.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TriggerMap {
    pub entries: BTreeMap<String, Vec<UrlId>>,
}

impl TriggerMap {
    pub fn get(&self, callback: &str) -> Option<&[UrlId]> {
        self.entries.get(callback).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds `url` to `callback`'s list unless already present.
    pub fn add(&mut self, callback: &str, url: &str) {
        let urls = self.entries.entry(callback.to_string()).or_default();
        if !urls.iter().any(|u| u == url) {
            urls.push(url.to_string());
        }
    }
}

/// Runs the original app once and picks the net method with the largest cumulative time.
/// Ties go to the lexicographically smaller name.
pub fn profile_fetch_signature(
    app: &App,
    trace: &Trace,
    net: &NetModel,
) -> Result<FetchSignature, ProfileError> {
    let log = run_trace(app, trace, net, &UrlMap::default(), None)?;
    let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
    for d in log.demands() {
        *totals.entry(d.method).or_default() += d.response_time_ms;
    }
    // BTreeMap iterates names ascending, so keeping the first maximum breaks ties by name.
    let mut best: Option<(&str, u64)> = None;
    for (name, total) in totals {
        if best.is_none_or(|(_, t)| total > t) {
            best = Some((name, total));
        }
    }
    best.map(|(name, _)| FetchSignature::new(name))
        .ok_or(ProfileError::NothingToProfile)
}

/// Fetch Spots in program order as `(target method, url)`.
pub fn fetch_spots<'a>(app: &'a App, sig: &'a FetchSignature) -> Vec<(&'a str, &'a str)> {
    app.statements()
        .filter_map(|(container, _, s)| match s {
            Stmt::NetCall { method, url } if method == sig.method() => {
                Some((container, url.as_str()))
            }
            _ => None,
        })
        .collect()
}

/// Callbacks that are immediate CCFG predecessors of `target` with exactly one wait node
/// in between.
pub fn trigger_callbacks<'a>(app: &App, ccfg: &'a Ccfg, target: &'a str) -> Vec<&'a str> {
    let mut out = Vec::new();
    for wait in ccfg.predecessors(target).filter(|n| ccfg.is_wait(n)) {
        for pred in ccfg.predecessors(wait) {
            if app.is_callback(pred) && !out.contains(&pred) {
                out.push(pred);
            }
        }
    }
    out
}

/// Builds the Trigger Map for the given fetch signature.
pub fn identify_trigger_callbacks(
    app: &App,
    ccfg: &Ccfg,
    ecg: &Ecg,
    sig: &FetchSignature,
) -> TriggerMap {
    let mut map = TriggerMap::default();
    for (target_method, url) in fetch_spots(app, sig) {
        let target_callbacks = ecg
            .reaching(target_method)
            .into_iter()
            .filter(|n| app.is_callback(n));
        for target in target_callbacks {
            for trigger in trigger_callbacks(app, ccfg, &target) {
                map.add(trigger, url);
            }
        }
    }
    map
}
