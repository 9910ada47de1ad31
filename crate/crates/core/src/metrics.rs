//! Accuracy and effectiveness measures over run logs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::app_ir::{App, StaticSource, Stmt, UrlId, UrlPart};
use crate::instrument::Hints;
use crate::runtime::{
    check_trace_step, Event, RunLog, ServedFrom, Trace, MAX_CALL_DEPTH, UNASSIGNED,
};
use crate::string_analysis::{resolve_source, UrlMap, UrlPartState};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("oracle has no entry for trigger evaluation {0}")]
    MissingOracleEntry(usize),
    #[error("oracle entry {index} is for `{oracle}` but the run triggered `{run}`")]
    CallbackMismatch {
        index: usize,
        oracle: String,
        run: String,
    },
    #[error("oracle has {oracle} entries but the run has {run} trigger evaluations")]
    ExtraOracleEntries { oracle: usize, run: usize },
    #[error("request {index} differs between runs: {base} vs {opt}")]
    RequestMismatch {
        index: usize,
        base: String,
        opt: String,
    },
    #[error("oracle replay failed: {0}")]
    Replay(String),
}

/// Micro-averaged precision and recall over all trigger points.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Accuracy {
    pub issued: usize,
    pub prefetchable: usize,
    pub correct: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

impl Accuracy {
    pub fn precision(&self) -> f64 {
        ratio(self.correct, self.issued)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.correct, self.prefetchable)
    }

    pub fn merge(&mut self, other: &Accuracy) {
        self.issued += other.issued;
        self.prefetchable += other.prefetchable;
        self.correct += other.correct;
    }
}

/// URLs that were really prefetchable at one trigger point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub callback: String,
    pub prefetchable: Vec<UrlId>,
}

/// One entry per executed `trigger_prefetch`, in execution order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Oracle {
    pub entries: Vec<OracleEntry>,
}

pub fn compute_accuracy(log: &RunLog, oracle: &Oracle) -> Result<Accuracy, MetricsError> {
    let mut acc = Accuracy::default();
    let mut index = 0;
    for e in &log.events {
        let Event::TriggerEval {
            callback, issued, ..
        } = e
        else {
            continue;
        };
        let entry = oracle
            .entries
            .get(index)
            .ok_or(MetricsError::MissingOracleEntry(index))?;
        if entry.callback != *callback {
            return Err(MetricsError::CallbackMismatch {
                index,
                oracle: entry.callback.clone(),
                run: callback.clone(),
            });
        }
        let truth: BTreeSet<&UrlId> = entry.prefetchable.iter().collect();
        let issued: BTreeSet<&UrlId> = issued.iter().collect();
        acc.issued += issued.len();
        acc.prefetchable += truth.len();
        acc.correct += issued.intersection(&truth).count();
        index += 1;
    }
    if oracle.entries.len() != index {
        return Err(MetricsError::ExtraOracleEntries {
            oracle: oracle.entries.len(),
            run: index,
        });
    }
    Ok(acc)
}

/// Replays definitions along the trace to decide, at every trigger point, which of the
/// requested URLs were fully knowable and not yet fetched or prefetched.
struct Replay<'a> {
    app: &'a App,
    seed: &'a UrlMap,
    hints: Option<&'a Hints>,
    threshold: usize,
    vars: BTreeMap<String, String>,
    urls: BTreeMap<UrlId, String>,
    requested: BTreeSet<String>,
    oracle: Oracle,
    current: String,
}

impl Replay<'_> {
    fn knowable(&self, url_id: &str) -> Result<Option<String>, MetricsError> {
        if let Some(pinned) = self.hints.and_then(|h| h.extra_static_urls.get(url_id)) {
            return Ok(Some(pinned.clone()));
        }
        let Some(parts) = self.app.url_spot(url_id) else {
            return Ok(None);
        };
        let seeded = self.seed.get(url_id);
        let mut s = String::new();
        for (i, part) in parts.iter().enumerate() {
            let m = i + 1;
            match part {
                UrlPart::Literal(l) => s.push_str(l),
                UrlPart::Resource(k) => s.push_str(
                    &resolve_source(self.app, &StaticSource::Resource(k.clone()))
                        .map_err(|e| MetricsError::Replay(e.to_string()))?,
                ),
                UrlPart::Var(v) => {
                    if let Some(UrlPartState::Concrete(c)) = seeded.and_then(|p| p.get(i)) {
                        s.push_str(c);
                        continue;
                    }
                    let Some(mut value) = self.vars.get(v).cloned() else {
                        return Ok(None);
                    };
                    for r in self.hints.iter().flat_map(|h| &h.rewrite_rules) {
                        if r.url == url_id && r.m == m {
                            value = value.replace(&r.find, &r.replace);
                        }
                    }
                    s.push_str(&value);
                }
            }
        }
        Ok(Some(s))
    }

    fn run_body(
        &mut self,
        name: &str,
        inputs: &BTreeMap<String, String>,
        depth: usize,
    ) -> Result<(), MetricsError> {
        if depth > MAX_CALL_DEPTH {
            return Err(MetricsError::Replay(format!(
                "call depth exceeded in `{name}`"
            )));
        }
        let app = self.app;
        let body = app
            .body(name)
            .ok_or_else(|| MetricsError::Replay(format!("unknown body `{name}`")))?;
        for stmt in &body.stmts {
            match stmt {
                Stmt::DefineStatic { var, source } => {
                    let v = resolve_source(app, source)
                        .map_err(|e| MetricsError::Replay(e.to_string()))?;
                    self.vars.insert(var.clone(), v);
                }
                Stmt::DefineDynamic { var, tag } => {
                    let v = inputs
                        .get(tag)
                        .ok_or_else(|| MetricsError::Replay(format!("no input `{tag}`")))?;
                    self.vars.insert(var.clone(), v.clone());
                }
                Stmt::BuildUrl { url, parts } => {
                    let mut s = String::new();
                    for p in parts {
                        match p {
                            UrlPart::Literal(l) => s.push_str(l),
                            UrlPart::Resource(k) => s.push_str(
                                &resolve_source(app, &StaticSource::Resource(k.clone()))
                                    .map_err(|e| MetricsError::Replay(e.to_string()))?,
                            ),
                            UrlPart::Var(v) => {
                                s.push_str(self.vars.get(v).map_or(UNASSIGNED, String::as_str))
                            }
                        }
                    }
                    self.urls.insert(url.clone(), s);
                }
                Stmt::FetchFromProxy { url, .. } => {
                    let s = self
                        .urls
                        .get(url)
                        .ok_or_else(|| MetricsError::Replay(format!("url `{url}` not built")))?;
                    self.requested.insert(s.clone());
                }
                Stmt::TriggerPrefetch(ids) => {
                    let mut prefetchable = Vec::new();
                    let mut taken = 0;
                    for id in ids {
                        let Some(url) = self.knowable(id)? else {
                            continue;
                        };
                        if self.requested.contains(&url) {
                            continue;
                        }
                        prefetchable.push(id.clone());
                        if taken < self.threshold {
                            self.requested.insert(url);
                            taken += 1;
                        }
                    }
                    self.oracle.entries.push(OracleEntry {
                        callback: name.to_string(),
                        prefetchable,
                    });
                }
                Stmt::Call(m) | Stmt::AsyncCall(m) => self.run_body(m, inputs, depth + 1)?,
                Stmt::Transition(cb) => {
                    self.current = cb.clone();
                    self.run_body(cb, inputs, depth + 1)?;
                }
                Stmt::NetCall { .. } | Stmt::SendDefinition { .. } => {}
            }
        }
        Ok(())
    }
}

/// Ground truth for [`compute_accuracy`], computed without consulting the proxy.
///
/// A URL counts as prefetchable at a trigger point when every part is concrete (statically,
/// pinned by a hint, or assigned earlier in the session) and its concrete string has not
/// been demanded or prefetched already. As with the proxy, at most `threshold` of them
/// are assumed to go out per trigger.
pub fn ground_truth_oracle(
    app: &App,
    trace: &Trace,
    seed: &UrlMap,
    hints: Option<&Hints>,
    threshold: usize,
) -> Result<Oracle, MetricsError> {
    let mut r = Replay {
        app,
        seed,
        hints,
        threshold: threshold.max(1),
        vars: BTreeMap::new(),
        urls: BTreeMap::new(),
        requested: BTreeSet::new(),
        oracle: Oracle::default(),
        current: String::new(),
    };
    for (k, step) in trace.steps.iter().enumerate() {
        let current = (k > 0).then(|| r.current.clone());
        check_trace_step(app, current.as_deref(), k, &step.event)
            .map_err(|e| MetricsError::Replay(e.to_string()))?;
        r.current = step.event.clone();
        r.run_body(&step.event, &step.inputs, 0)?;
    }
    Ok(r.oracle)
}

/// Latency change of one demanded request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestReduction {
    pub url_id: UrlId,
    pub url: String,
    pub orig_ms: u64,
    pub opt_ms: u64,
    pub served_from: ServedFrom,
    /// `(orig − opt) / orig`; 0 when the original took no time.
    pub reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub requests: Vec<RequestReduction>,
    pub hit_rate: f64,
    pub mean_reduction: f64,
    /// Mean reduction over hit requests only; `None` without hits.
    pub hit_reduction: Option<f64>,
    pub overhead_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<Accuracy>,
}

impl Metrics {
    pub fn hits(&self) -> usize {
        self.requests
            .iter()
            .filter(|r| r.served_from.is_hit())
            .count()
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Compares a baseline run with an optimized run of the same session.
pub fn compute_effectiveness(base: &RunLog, opt: &RunLog) -> Result<Metrics, MetricsError> {
    let b: Vec<_> = base.demands().collect();
    let o: Vec<_> = opt.demands().collect();
    let mut requests = Vec::with_capacity(b.len());
    for index in 0..b.len().max(o.len()) {
        let describe = |d: Option<&crate::runtime::DemandRecord<'_>>| {
            d.map_or("<none>".to_string(), |d| format!("{} {}", d.url_id, d.url))
        };
        let (Some(x), Some(y)) = (b.get(index), o.get(index)) else {
            return Err(MetricsError::RequestMismatch {
                index,
                base: describe(b.get(index)),
                opt: describe(o.get(index)),
            });
        };
        if x.url_id != y.url_id || x.url != y.url {
            return Err(MetricsError::RequestMismatch {
                index,
                base: describe(Some(x)),
                opt: describe(Some(y)),
            });
        }
        let reduction = if x.response_time_ms == 0 {
            0.0
        } else {
            (x.response_time_ms as f64 - y.response_time_ms as f64) / x.response_time_ms as f64
        };
        requests.push(RequestReduction {
            url_id: x.url_id.to_string(),
            url: x.url.to_string(),
            orig_ms: x.response_time_ms,
            opt_ms: y.response_time_ms,
            served_from: y.served_from,
            reduction,
        });
    }
    let hits: Vec<f64> = requests
        .iter()
        .filter(|r| r.served_from.is_hit())
        .map(|r| r.reduction)
        .collect();
    let all: Vec<f64> = requests.iter().map(|r| r.reduction).collect();
    Ok(Metrics {
        hit_rate: if requests.is_empty() {
            0.0
        } else {
            hits.len() as f64 / requests.len() as f64
        },
        mean_reduction: mean(&all).unwrap_or(0.0),
        hit_reduction: mean(&hits),
        overhead_ms: opt.overhead.total_ms(),
        requests,
        accuracy: None,
    })
}

/// Min, max, mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub min: f64,
    pub max: f64,
    pub avg: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Option<Stat> {
        let avg = mean(xs)?;
        let var = xs.iter().map(|x| (x - avg).powi(2)).sum::<f64>() / xs.len() as f64;
        Some(Stat {
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            avg,
            std: var.sqrt(),
        })
    }
}

/// Distribution of per-session results across several app/trace pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub sessions: usize,
    pub runtime_requests: Option<Stat>,
    pub hit_rate: Option<Stat>,
    /// Over sessions that had at least one hit.
    pub latency_reduction: Option<Stat>,
}

pub fn summarize(metrics: &[Metrics]) -> Summary {
    let requests: Vec<f64> = metrics.iter().map(|m| m.requests.len() as f64).collect();
    let hit_rates: Vec<f64> = metrics.iter().map(|m| m.hit_rate).collect();
    let reductions: Vec<f64> = metrics.iter().filter_map(|m| m.hit_reduction).collect();
    Summary {
        sessions: metrics.len(),
        runtime_requests: Stat::of(&requests),
        hit_rate: Stat::of(&hit_rates),
        latency_reduction: Stat::of(&reductions),
    }
}

impl Summary {
    /// Plain-text table with Min/Max/Avg/Std columns.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<18}\t{:>8}\t{:>8}\t{:>8}\t{:>8}",
            "", "Min", "Max", "Avg", "Std"
        );
        fn count(v: f64) -> String {
            format!("{v:.2}")
        }
        fn pct(v: f64) -> String {
            format!("{:.2}%", v * 100.0)
        }
        let rows = [
            (
                "Runtime Requests",
                self.runtime_requests,
                count as fn(f64) -> String,
            ),
            ("Hit Rate", self.hit_rate, pct),
            ("Latency Reduction", self.latency_reduction, pct),
        ];
        for (name, stat, f) in rows {
            match stat {
                Some(s) => {
                    let _ = writeln!(
                        out,
                        "{name:<18}\t{:>8}\t{:>8}\t{:>8}\t{:>8}",
                        f(s.min),
                        f(s.max),
                        f(s.avg),
                        f(s.std)
                    );
                }
                None => {
                    let _ = writeln!(
                        out,
                        "{name:<18}\t{:>8}\t{:>8}\t{:>8}\t{:>8}",
                        "-", "-", "-", "-"
                    );
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::Overhead;

    fn demand(url_id: &str, ms: u64, served_from: ServedFrom) -> Event {
        Event::Demand {
            url_id: url_id.into(),
            url: format!("http://h/{url_id}"),
            method: "get".into(),
            at: 0,
            served_from,
            response_time_ms: ms,
            payload: String::new(),
        }
    }

    fn trigger(callback: &str, issued: &[&str]) -> Event {
        Event::TriggerEval {
            callback: callback.into(),
            at: 0,
            considered: vec![],
            issued: issued.iter().map(|s| s.to_string()).collect(),
            skipped_known_cached: vec![],
            skipped_unknown: vec![],
            skipped_threshold: vec![],
        }
    }

    fn log(events: Vec<Event>) -> RunLog {
        RunLog {
            events,
            ..RunLog::default()
        }
    }

    fn entry(callback: &str, urls: &[&str]) -> OracleEntry {
        OracleEntry {
            callback: callback.into(),
            prefetchable: urls.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn no_triggers_is_perfect() {
        let acc = compute_accuracy(&log(vec![]), &Oracle::default()).unwrap();
        assert_eq!((acc.precision(), acc.recall()), (1.0, 1.0));
    }

    #[test]
    fn nothing_issued_means_zero_recall() {
        let oracle = Oracle {
            entries: vec![entry("a", &["u"])],
        };
        let acc = compute_accuracy(&log(vec![trigger("a", &[])]), &oracle).unwrap();
        assert_eq!(acc.recall(), 0.0);
        assert_eq!(acc.precision(), 1.0);
    }

    #[test]
    fn micro_average_over_trigger_points() {
        let oracle = Oracle {
            entries: vec![entry("a", &["u", "v"]), entry("b", &["w"])],
        };
        let run = log(vec![trigger("a", &["v", "x"]), trigger("b", &["w"])]);
        let acc = compute_accuracy(&run, &oracle).unwrap();
        assert_eq!(acc.correct, 2);
        assert_eq!(acc.precision(), 2.0 / 3.0);
        assert_eq!(acc.recall(), 2.0 / 3.0);
    }

    #[test]
    fn oracle_must_cover_every_trigger() {
        let run = log(vec![trigger("a", &[])]);
        assert_eq!(
            compute_accuracy(&run, &Oracle::default()),
            Err(MetricsError::MissingOracleEntry(0))
        );
        let oracle = Oracle {
            entries: vec![entry("b", &[])],
        };
        assert!(matches!(
            compute_accuracy(&run, &oracle),
            Err(MetricsError::CallbackMismatch { .. })
        ));
    }

    #[test]
    fn effectiveness_per_request() {
        let base = log(vec![
            demand("a", 1000, ServedFrom::Origin),
            demand("b", 1000, ServedFrom::Origin),
        ]);
        let mut opt = log(vec![
            demand("a", 0, ServedFrom::Cache),
            demand("b", 700, ServedFrom::WaitedMs(700)),
        ]);
        opt.overhead = Overhead {
            trigger_prefetch_calls: 1,
            trigger_prefetch_ms: 4,
            ..Overhead::default()
        };
        let m = compute_effectiveness(&base, &opt).unwrap();
        assert_eq!(m.requests[0].reduction, 1.0);
        assert!((m.requests[1].reduction - 0.3).abs() < 1e-12);
        assert_eq!(m.hit_rate, 1.0);
        assert_eq!(m.overhead_ms, 4);
    }

    #[test]
    fn differing_requests_are_rejected() {
        let base = log(vec![demand("a", 1000, ServedFrom::Origin)]);
        let opt = log(vec![demand("b", 0, ServedFrom::Cache)]);
        assert!(matches!(
            compute_effectiveness(&base, &opt),
            Err(MetricsError::RequestMismatch { index: 0, .. })
        ));
        let longer = log(vec![
            demand("a", 1000, ServedFrom::Origin),
            demand("a", 1000, ServedFrom::Origin),
        ]);
        assert!(compute_effectiveness(&base, &longer).is_err());
    }

    #[test]
    fn stat_uses_population_deviation() {
        let s = Stat::of(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!((s.min, s.max, s.avg, s.std), (2.0, 9.0, 5.0, 2.0));
        assert!(Stat::of(&[]).is_none());
    }

    #[test]
    fn summary_table_has_three_rows() {
        let base = log(vec![demand("a", 1000, ServedFrom::Origin)]);
        let opt = log(vec![demand("a", 0, ServedFrom::Cache)]);
        let m = compute_effectiveness(&base, &opt).unwrap();
        let table = summarize(&[m.clone(), m]).to_table();
        assert_eq!(table.lines().count(), 4);
        assert!(table.contains("Hit Rate"));
        assert!(table.contains("100.00%"));
    }
}
