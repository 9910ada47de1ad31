//! Deterministic discrete-event execution of an app over a user trace.
//!
//! Virtual time only moves for user think time, network transfers the app blocks on, and
//! configured instrumentation costs. Prefetches run in the background: they occupy the
//! network but not the app, and their responses land in the proxy cache at
//! `issue time + latency`.

mod log;
mod net;
mod proxy;
mod trace;

use std::collections::BTreeMap;

pub use log::{DemandRecord, Event, Overhead, RunLog, ServedFrom};
pub use net::{NetModel, PseudoCosts, DEFAULT_THRESHOLD};
pub use proxy::{CacheEntry, IssuedPrefetch, ProxyState, Served, TriggerOutcome};
pub use trace::{Step, Trace};

use crate::app_ir::{App, Stmt, UrlId, UrlPart};
use crate::instrument::{Hints, RewriteRule};
use crate::string_analysis::{resolve_source, AnalysisError, UrlMap};

/// Nested `call`/`goto` depth at which execution is abandoned.
pub const MAX_CALL_DEPTH: usize = 64;

/// Value an unassigned variable contributes to a URL, as string concatenation of a null
/// reference would.
pub const UNASSIGNED: &str = "null";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuntimeError {
    #[error("invalid trace step {step}: {reason}")]
    InvalidStep { step: usize, reason: String },
    #[error("step {step}: no value for input `{tag}`")]
    MissingInput { step: usize, tag: String },
    #[error("url `{0}` used before its url spot executed")]
    UrlNotBuilt(String),
    #[error("runtime URL map has no part {m} for url `{url}`")]
    UnknownPart { url: String, m: usize },
    #[error("variable `{0}` sent before it was assigned")]
    Unassigned(String),
    #[error("call depth exceeded {MAX_CALL_DEPTH} in `{0}`")]
    CallDepth(String),
    #[error("unknown callback or method `{0}`")]
    UnknownBody(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

struct Machine<'a> {
    app: &'a App,
    net: &'a NetModel,
    rules: &'a [RewriteRule],
    proxy: ProxyState,
    prefetch_method: BTreeMap<UrlId, String>,
    vars: BTreeMap<String, String>,
    urls: BTreeMap<UrlId, String>,
    clock: u64,
    current: String,
    log: RunLog,
}

impl<'a> Machine<'a> {
    fn tick(&mut self, ms: u64) {
        self.clock += ms;
        self.proxy.advance(self.clock);
    }

    fn prefetch_latency(&self, url_id: &str) -> u64 {
        match self.prefetch_method.get(url_id) {
            Some(m) => self.net.latency(self.app, m),
            None => self.net.default_latency_ms.unwrap_or(0),
        }
    }

    fn run_body(
        &mut self,
        name: &str,
        step: usize,
        inputs: &BTreeMap<String, String>,
        depth: usize,
    ) -> Result<(), RuntimeError> {
        if depth > MAX_CALL_DEPTH {
            return Err(RuntimeError::CallDepth(name.to_string()));
        }
        let app = self.app;
        let body = app
            .body(name)
            .ok_or_else(|| RuntimeError::UnknownBody(name.to_string()))?;
        for stmt in &body.stmts {
            self.exec(name, stmt, step, inputs, depth)?;
        }
        Ok(())
    }

    fn exec(
        &mut self,
        container: &str,
        stmt: &Stmt,
        step: usize,
        inputs: &BTreeMap<String, String>,
        depth: usize,
    ) -> Result<(), RuntimeError> {
        match stmt {
            Stmt::DefineStatic { var, source } => {
                let v = resolve_source(self.app, source)?;
                self.vars.insert(var.clone(), v);
            }
            Stmt::DefineDynamic { var, tag } => {
                let v = inputs.get(tag).ok_or_else(|| RuntimeError::MissingInput {
                    step,
                    tag: tag.clone(),
                })?;
                self.vars.insert(var.clone(), v.clone());
            }
            Stmt::BuildUrl { url, parts } => {
                let mut s = String::new();
                for p in parts {
                    match p {
                        UrlPart::Literal(l) => s.push_str(l),
                        UrlPart::Resource(k) => s.push_str(&resolve_source(
                            self.app,
                            &crate::app_ir::StaticSource::Resource(k.clone()),
                        )?),
                        UrlPart::Var(v) => {
                            s.push_str(self.vars.get(v).map_or(UNASSIGNED, String::as_str))
                        }
                    }
                }
                self.urls.insert(url.clone(), s);
            }
            Stmt::NetCall { method, url } => {
                let concrete = self.built(url)?;
                let latency = self.net.latency(self.app, method);
                let payload = self.net.payload(&concrete);
                self.log.events.push(Event::Demand {
                    url_id: url.clone(),
                    url: concrete,
                    method: method.clone(),
                    at: self.clock,
                    served_from: ServedFrom::Origin,
                    response_time_ms: latency,
                    payload,
                });
                self.tick(latency);
            }
            Stmt::Call(m) | Stmt::AsyncCall(m) => {
                self.run_body(m, step, inputs, depth + 1)?;
            }
            Stmt::Transition(cb) => {
                self.current = cb.clone();
                self.run_body(cb, step, inputs, depth + 1)?;
            }
            Stmt::SendDefinition { var, url, m } => {
                let cost = self.net.costs.send_definition_ms;
                self.log.overhead.send_definition_calls += 1;
                self.log.overhead.send_definition_ms += cost;
                self.tick(cost);
                let value = self
                    .vars
                    .get(var)
                    .cloned()
                    .ok_or_else(|| RuntimeError::Unassigned(var.clone()))?;
                let stored = self.proxy.on_send_definition(url, *m, &value, self.rules)?;
                self.log.events.push(Event::DefinitionUpdate {
                    url_id: url.clone(),
                    m: *m,
                    value: stored,
                    at: self.clock,
                });
            }
            Stmt::TriggerPrefetch(url_ids) => {
                let cost = self.net.costs.trigger_prefetch_ms;
                self.log.overhead.trigger_prefetch_calls += 1;
                self.log.overhead.trigger_prefetch_ms += cost;
                self.tick(cost);
                let latencies: BTreeMap<&str, u64> = url_ids
                    .iter()
                    .map(|u| (u.as_str(), self.prefetch_latency(u)))
                    .collect();
                let net = self.net;
                let out = self
                    .proxy
                    .on_trigger_prefetch(url_ids, self.clock, |id, url| {
                        (latencies[id], net.payload(url))
                    });
                self.log.events.push(Event::TriggerEval {
                    callback: container.to_string(),
                    at: self.clock,
                    considered: url_ids.clone(),
                    issued: out.issued.iter().map(|p| p.url_id.clone()).collect(),
                    skipped_known_cached: out.skipped_known_cached,
                    skipped_unknown: out.skipped_unknown,
                    skipped_threshold: out.skipped_threshold,
                });
                for p in out.issued {
                    self.log.events.push(Event::Prefetch {
                        url_id: p.url_id,
                        url: p.url,
                        issued_at: p.issued_at,
                        ready_at: p.ready_at,
                    });
                }
            }
            Stmt::FetchFromProxy { method, url } => {
                let cost = self.net.costs.fetch_from_proxy_ms;
                self.log.overhead.fetch_from_proxy_calls += 1;
                self.log.overhead.fetch_from_proxy_ms += cost;
                self.tick(cost);
                let concrete = self.built(url)?;
                let latency = self.net.latency(self.app, method);
                let net = self.net;
                let served = self.proxy.on_fetch_from_proxy(&concrete, self.clock, || {
                    (latency, net.payload(&concrete))
                });
                self.log.events.push(Event::Demand {
                    url_id: url.clone(),
                    url: concrete,
                    method: method.clone(),
                    at: self.clock,
                    served_from: served.served_from,
                    response_time_ms: served.response_time_ms,
                    payload: served.payload,
                });
                self.tick(served.response_time_ms);
            }
        }
        Ok(())
    }

    fn built(&self, url: &str) -> Result<String, RuntimeError> {
        self.urls
            .get(url)
            .cloned()
            .ok_or_else(|| RuntimeError::UrlNotBuilt(url.to_string()))
    }
}

/// Checks that `event` may be fired by the user after callback `current` (`None` before the
/// first step): entry callbacks start a session, later events must be reachable from the
/// current callback through one wait node.
pub fn check_trace_step(
    app: &App,
    current: Option<&str>,
    step: usize,
    event: &str,
) -> Result<(), RuntimeError> {
    let invalid = |reason: String| RuntimeError::InvalidStep { step, reason };
    if !app.is_callback(event) {
        return Err(invalid(format!("`{event}` is not a callback")));
    }
    match current {
        None => {
            if !app.entry_callbacks().contains(&event) {
                return Err(invalid(format!("`{event}` is not an entry callback")));
            }
        }
        Some(cur) => {
            if !app.ccfg.next_via_wait(cur).any(|n| n == event) {
                return Err(invalid(format!(
                    "`{event}` is not reachable from `{cur}` through a wait node"
                )));
            }
        }
    }
    Ok(())
}

/// URL id → net method used at its first fetch, preferring proxy fetches.
fn fetch_methods(app: &App) -> BTreeMap<UrlId, String> {
    let mut out = BTreeMap::new();
    for (_, _, s) in app.statements() {
        if let Stmt::FetchFromProxy { method, url } = s {
            out.entry(url.clone()).or_insert_with(|| method.clone());
        }
    }
    for (_, _, s) in app.statements() {
        if let Stmt::NetCall { method, url } = s {
            out.entry(url.clone()).or_insert_with(|| method.clone());
        }
    }
    out
}

/// Runs `app` (original or instrumented) over `trace`.
///
/// `seed` initializes the proxy's URL Map and is only consulted by instrumented apps.
/// `hints` supplies rewrite rules and pinned static URLs.
pub fn run_trace(
    app: &App,
    trace: &Trace,
    net: &NetModel,
    seed: &UrlMap,
    hints: Option<&Hints>,
) -> Result<RunLog, RuntimeError> {
    let empty: &[RewriteRule] = &[];
    let mut m = Machine {
        app,
        net,
        rules: hints.map_or(empty, |h| h.rewrite_rules.as_slice()),
        proxy: ProxyState::new(seed, hints, net.threshold.max(1)),
        prefetch_method: fetch_methods(app),
        vars: BTreeMap::new(),
        urls: BTreeMap::new(),
        clock: 0,
        current: String::new(),
        log: RunLog {
            app: app.name.clone(),
            instrumented: app.instrumented,
            ..RunLog::default()
        },
    };
    for (k, step) in trace.steps.iter().enumerate() {
        let current = if k == 0 {
            None
        } else {
            Some(m.current.as_str())
        };
        check_trace_step(app, current, k, &step.event)?;
        m.tick(step.think_ms);
        m.current = step.event.clone();
        m.run_body(&step.event, k, &step.inputs, 0)?;
    }
    m.log.end_ms = m.clock;
    Ok(m.log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::app_ir::{build_ecg, parse_app};
    use crate::callback_analysis::{identify_trigger_callbacks, FetchSignature};
    use crate::fixtures::weather;
    use crate::instrument::instrument;
    use crate::string_analysis::analyze_urls;

    fn weather_trace(select_city: bool, think: u64) -> Trace {
        let mut steps = vec![Step::new("onCreate", 0)];
        if select_city {
            steps.push(Step::new("onItemSelected", think).input("cityName", "Gothenburg"));
        }
        steps.push(Step::new("onClick", think).input("cityId", "42"));
        Trace::new(steps)
    }

    fn instrumented_weather() -> (App, UrlMap) {
        let app = weather();
        let map = analyze_urls(&app).unwrap();
        let sig = FetchSignature::new("getInputStream");
        let tm = identify_trigger_callbacks(&app, &app.ccfg, &build_ecg(&app), &sig);
        (instrument(&app, &map, &tm, &sig).unwrap().app, map)
    }

    fn served(log: &RunLog) -> Vec<(String, ServedFrom)> {
        log.demands()
            .map(|d| (d.url_id.to_string(), d.served_from))
            .collect()
    }

    #[test]
    fn original_app_always_goes_to_origin() {
        let app = weather();
        let log = run_trace(
            &app,
            &weather_trace(true, 2000),
            &NetModel::default(),
            &UrlMap::default(),
            None,
        )
        .unwrap();
        for d in log.demands() {
            assert_eq!(d.served_from, ServedFrom::Origin);
            assert_eq!(d.response_time_ms, 800);
        }
        assert_eq!(log.demands().count(), 3);
        assert_eq!(log.end_ms, 2000 + 2000 + 3 * 800);
    }

    #[test]
    fn weather_with_city_selection() {
        let (app, map) = instrumented_weather();
        let log = run_trace(
            &app,
            &weather_trace(true, 2000),
            &NetModel::default(),
            &map,
            None,
        )
        .unwrap();
        assert_eq!(
            served(&log),
            vec![
                ("url1".into(), ServedFrom::Cache),
                ("url2".into(), ServedFrom::Cache),
                ("url3".into(), ServedFrom::Origin),
            ]
        );
    }

    #[test]
    fn weather_without_city_selection() {
        let (app, map) = instrumented_weather();
        let log = run_trace(
            &app,
            &weather_trace(false, 2000),
            &NetModel::default(),
            &map,
            None,
        )
        .unwrap();
        assert_eq!(
            served(&log),
            vec![
                ("url1".into(), ServedFrom::Cache),
                ("url2".into(), ServedFrom::Origin),
                ("url3".into(), ServedFrom::Origin),
            ]
        );
        let url2 = log.demands().nth(1).unwrap();
        assert_eq!(url2.url, "http://weatherapi/weather?&cityName=null");
    }

    #[test]
    fn invalid_steps_are_rejected() {
        let app = weather();
        let bad_first = Trace::new(vec![Step::new("onClick", 0)]);
        let err = run_trace(
            &app,
            &bad_first,
            &NetModel::default(),
            &UrlMap::default(),
            None,
        )
        .unwrap_err();
        assert!(err.to_string().starts_with("invalid trace step 0"));

        let no_wait = Trace::new(vec![
            Step::new("onCreate", 0),
            Step::new("onClick", 0).input("cityId", "1"),
            Step::new("onItemSelected", 0).input("cityName", "x"),
        ]);
        let err = run_trace(
            &app,
            &no_wait,
            &NetModel::default(),
            &UrlMap::default(),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, RuntimeError::InvalidStep { step: 2, .. }));
    }

    #[test]
    fn missing_input_is_reported() {
        let app = weather();
        let t = Trace::new(vec![Step::new("onCreate", 0), Step::new("onClick", 0)]);
        let err = run_trace(&app, &t, &NetModel::default(), &UrlMap::default(), None).unwrap_err();
        assert_eq!(
            err,
            RuntimeError::MissingInput {
                step: 1,
                tag: "cityId".into()
            }
        );
    }

    #[test]
    fn recursion_is_bounded() {
        let app = parse_app("app x\ncallback a { call h }\nmethod h { call h }\n").unwrap();
        let t = Trace::new(vec![Step::new("a", 0)]);
        let err = run_trace(&app, &t, &NetModel::default(), &UrlMap::default(), None).unwrap_err();
        assert!(matches!(err, RuntimeError::CallDepth(_)));
    }

    #[test]
    fn costs_are_accounted() {
        let (app, map) = instrumented_weather();
        let net = NetModel {
            costs: PseudoCosts {
                send_definition_ms: 1,
                trigger_prefetch_ms: 2,
                fetch_from_proxy_ms: 3,
            },
            ..NetModel::default()
        };
        let log = run_trace(&app, &weather_trace(true, 2000), &net, &map, None).unwrap();
        assert_eq!(log.overhead.send_definition_calls, 2);
        assert_eq!(log.overhead.trigger_prefetch_calls, 2);
        assert_eq!(log.overhead.fetch_from_proxy_calls, 3);
        assert_eq!(log.overhead.total_ms(), 2 + 4 + 9);
    }

    #[test]
    fn timestamps_do_not_decrease() {
        let (app, map) = instrumented_weather();
        let log = run_trace(
            &app,
            &weather_trace(true, 300),
            &NetModel::default(),
            &map,
            None,
        )
        .unwrap();
        let times: Vec<u64> = log.events.iter().map(Event::at).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]), "{times:?}");
    }
}
