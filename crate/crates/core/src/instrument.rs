//! Rewrites an app so it talks to the prefetching proxy.
//!
//! Three kinds of pseudo-statement are inserted: `send_definition` right after each runtime
//! Definition Spot, `trigger_prefetch` at the end of each Trigger Callback, and
//! `fetch_from_proxy` in place of every request made through the fetch signature.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::app_ir::{App, Stmt, UrlId};
use crate::callback_analysis::{FetchSignature, TriggerMap};
use crate::string_analysis::UrlMap;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstrumentError {
    #[error("app `{0}` is already instrumented")]
    AlreadyInstrumented(String),
    #[error("fetch signature `{0}` is not a declared net method")]
    UnknownSignature(String),
    #[error("unknown callback `{0}`")]
    UnknownCallback(String),
    #[error("unknown url `{0}`")]
    UnknownUrl(String),
    #[error("definition spot {container}[{stmt}] does not define a variable")]
    BadSpot { container: String, stmt: usize },
    #[error("rewrite rule targets part {m} of url `{url}`, which has no such part")]
    BadRewritePart { url: String, m: usize },
}

/// `find` → `replace` substitution applied to values sent for part `m` of `url`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteRule {
    pub url: UrlId,
    pub m: usize,
    pub find: String,
    pub replace: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerAt {
    Launch,
    #[default]
    End,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerHint {
    pub callback: String,
    pub urls: Vec<UrlId>,
    #[serde(default)]
    pub at: TriggerAt,
}

/// Developer edits to the analysis artifacts.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Hints {
    #[serde(default)]
    pub extra_trigger_entries: Vec<TriggerHint>,
    /// Whole URLs known ahead of time; the proxy treats them as resolved from the start.
    #[serde(default)]
    pub extra_static_urls: BTreeMap<UrlId, String>,
    #[serde(default)]
    pub rewrite_rules: Vec<RewriteRule>,
}

impl Hints {
    pub fn is_empty(&self) -> bool {
        self.extra_trigger_entries.is_empty()
            && self.extra_static_urls.is_empty()
            && self.rewrite_rules.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reason {
    /// Reports the variable defined at `stmt` of the same body.
    DefinitionSpot {
        stmt: usize,
    },
    TriggerPoint,
    /// Replaced a request through the fetch signature.
    FetchSpot,
    LaunchHint,
    EndHint,
}

/// Why the statement at `container[stmt]` of the instrumented app was inserted or rewritten.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub container: String,
    pub stmt: usize,
    pub reason: Reason,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstrumentedApp {
    pub app: App,
    pub provenance: Vec<Provenance>,
    pub hints: Hints,
}

fn check_artifacts(
    app: &App,
    url_map: &UrlMap,
    trigger_map: &TriggerMap,
) -> Result<(), InstrumentError> {
    let known = app.url_ids();
    for url in url_map.entries.keys() {
        if !known.contains(url) {
            return Err(InstrumentError::UnknownUrl(url.clone()));
        }
    }
    for (_, spot) in url_map.spots() {
        let stmt = app
            .body(&spot.container)
            .and_then(|b| b.stmts.get(spot.stmt_index));
        if stmt.and_then(Stmt::defined_var).is_none() {
            return Err(InstrumentError::BadSpot {
                container: spot.container.clone(),
                stmt: spot.stmt_index,
            });
        }
    }
    for (cb, urls) in &trigger_map.entries {
        if !app.is_callback(cb) {
            return Err(InstrumentError::UnknownCallback(cb.clone()));
        }
        if let Some(u) = urls.iter().find(|u| !known.contains(u)) {
            return Err(InstrumentError::UnknownUrl(u.clone()));
        }
    }
    Ok(())
}

/// Produces the optimized app from the analysis artifacts.
pub fn instrument(
    app: &App,
    url_map: &UrlMap,
    trigger_map: &TriggerMap,
    sig: &FetchSignature,
) -> Result<InstrumentedApp, InstrumentError> {
    if app.instrumented {
        return Err(InstrumentError::AlreadyInstrumented(app.name.clone()));
    }
    if app.netmethod(sig.method()).is_none() {
        return Err(InstrumentError::UnknownSignature(sig.method().to_string()));
    }
    check_artifacts(app, url_map, trigger_map)?;

    let mut out = app.clone();
    out.instrumented = true;
    let mut provenance = Vec::new();
    for body in out.bodies_mut() {
        let mut stmts = Vec::with_capacity(body.stmts.len());
        for (i, stmt) in body.stmts.iter().enumerate() {
            match stmt {
                Stmt::NetCall { method, url } if method == sig.method() => {
                    provenance.push(Provenance {
                        container: body.name.clone(),
                        stmt: stmts.len(),
                        reason: Reason::FetchSpot,
                    });
                    stmts.push(Stmt::FetchFromProxy {
                        method: method.clone(),
                        url: url.clone(),
                    });
                }
                _ => stmts.push(stmt.clone()),
            }
            if let Some(var) = stmt.defined_var() {
                for (url, m) in url_map.parts_defined_at(&body.name, i) {
                    provenance.push(Provenance {
                        container: body.name.clone(),
                        stmt: stmts.len(),
                        reason: Reason::DefinitionSpot { stmt: i },
                    });
                    stmts.push(Stmt::SendDefinition {
                        var: var.to_string(),
                        url,
                        m,
                    });
                }
            }
        }
        if let Some(urls) = trigger_map.get(&body.name) {
            provenance.push(Provenance {
                container: body.name.clone(),
                stmt: stmts.len(),
                reason: Reason::TriggerPoint,
            });
            stmts.push(Stmt::TriggerPrefetch(urls.to_vec()));
        }
        body.stmts = stmts;
    }
    Ok(InstrumentedApp {
        app: out,
        provenance,
        hints: Hints::default(),
    })
}

fn check_hints(app: &App, hints: &Hints) -> Result<(), InstrumentError> {
    let known = app.url_ids();
    let url_known = |u: &String| known.contains(u) || hints.extra_static_urls.contains_key(u);
    for h in &hints.extra_trigger_entries {
        if !app.is_callback(&h.callback) {
            return Err(InstrumentError::UnknownCallback(h.callback.clone()));
        }
        if let Some(u) = h.urls.iter().find(|u| !url_known(u)) {
            return Err(InstrumentError::UnknownUrl(u.clone()));
        }
    }
    for r in &hints.rewrite_rules {
        let parts = app
            .url_spot(&r.url)
            .ok_or_else(|| InstrumentError::UnknownUrl(r.url.clone()))?;
        if r.m == 0 || r.m > parts.len() {
            return Err(InstrumentError::BadRewritePart {
                url: r.url.clone(),
                m: r.m,
            });
        }
    }
    Ok(())
}

fn merge_urls(into: &mut Vec<UrlId>, urls: &[UrlId]) {
    for u in urls {
        if !into.contains(u) {
            into.push(u.clone());
        }
    }
}

/// Applies developer hints on top of an instrumented app.
pub fn apply_hints(ia: InstrumentedApp, hints: &Hints) -> Result<InstrumentedApp, InstrumentError> {
    check_hints(&ia.app, hints)?;
    let InstrumentedApp {
        mut app,
        mut provenance,
        hints: mut recorded,
    } = ia;
    for h in &hints.extra_trigger_entries {
        let body = app
            .body_mut(&h.callback)
            .ok_or_else(|| InstrumentError::UnknownCallback(h.callback.clone()))?;
        match h.at {
            TriggerAt::Launch => {
                if let Some(Stmt::TriggerPrefetch(existing)) = body.stmts.first_mut() {
                    if provenance.iter().any(|p| {
                        p.container == h.callback && p.stmt == 0 && p.reason == Reason::LaunchHint
                    }) {
                        merge_urls(existing, &h.urls);
                        continue;
                    }
                }
                body.stmts.insert(0, Stmt::TriggerPrefetch(h.urls.clone()));
                for p in provenance.iter_mut().filter(|p| p.container == h.callback) {
                    p.stmt += 1;
                }
                provenance.push(Provenance {
                    container: h.callback.clone(),
                    stmt: 0,
                    reason: Reason::LaunchHint,
                });
            }
            TriggerAt::End => {
                let last = body.stmts.len();
                if let Some(Stmt::TriggerPrefetch(existing)) = body.stmts.last_mut() {
                    merge_urls(existing, &h.urls);
                } else {
                    body.stmts.push(Stmt::TriggerPrefetch(h.urls.clone()));
                    provenance.push(Provenance {
                        container: h.callback.clone(),
                        stmt: last,
                        reason: Reason::EndHint,
                    });
                }
            }
        }
    }
    for h in &hints.extra_trigger_entries {
        recorded.extra_trigger_entries.push(h.clone());
    }
    recorded.extra_static_urls.extend(
        hints
            .extra_static_urls
            .iter()
            .map(|(k, v)| (k.clone(), v.clone())),
    );
    recorded
        .rewrite_rules
        .extend(hints.rewrite_rules.iter().cloned());
    Ok(InstrumentedApp {
        app,
        provenance,
        hints: recorded,
    })
}
