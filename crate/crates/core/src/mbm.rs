//! Microbenchmark: 25 single-request apps covering every placement of up to two dynamic
//! URL values, each with up to two Definition Spots, around the Trigger Point.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::app_ir::{build_ecg, parse_app, App};
use crate::callback_analysis::{identify_trigger_callbacks, FetchSignature};
use crate::instrument::instrument;
use crate::metrics::{compute_accuracy, ground_truth_oracle, Accuracy};
use crate::runtime::{run_trace, Event, NetModel, PseudoCosts, RunLog, ServedFrom, Step, Trace};
use crate::string_analysis::analyze_urls;

pub const CASE_COUNT: usize = 25;
pub const DEFAULT_LATENCY_MS: u64 = 1000;
pub const DEFAULT_THINK_MS: u64 = 2000;

const FETCH: &str = "fetch";
const URL: &str = "u";

/// Where a Definition Spot sits relative to the Trigger Point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Before,
    After,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prefetchability {
    Hit,
    NonHit,
    NonPrefetchable,
}

impl Prefetchability {
    pub fn label(self) -> &'static str {
        match self {
            Prefetchability::Hit => "H",
            Prefetchability::NonHit => "NH",
            Prefetchability::NonPrefetchable => "NP",
        }
    }
}

impl fmt::Display for Prefetchability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// `spots[i][j]` places the `j`-th definition of dynamic value `i` in program order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub id: usize,
    pub spots: Vec<Vec<Placement>>,
}

impl CaseConfig {
    /// Number of dynamic values.
    pub fn k(&self) -> usize {
        self.spots.len()
    }

    /// Definition Spot count per dynamic value.
    pub fn d(&self) -> Vec<usize> {
        self.spots.iter().map(Vec::len).collect()
    }

    pub fn pattern(&self) -> String {
        if self.spots.is_empty() {
            return "static".into();
        }
        let value = |v: &Vec<Placement>| -> String {
            v.iter()
                .map(|p| match p {
                    Placement::Before => 'B',
                    Placement::After => 'A',
                })
                .collect()
        };
        self.spots.iter().map(value).collect::<Vec<_>>().join("|")
    }
}

// One entry per case; each string lists one dynamic value's spots in program order.
const CASES: [&[&str]; CASE_COUNT] = [
    &[],
    &["B"],
    &["A"],
    &["BB"],
    &["BA"],
    &["AA"],
    &["B", "B"],
    &["A", "B"],
    &["A", "A"],
    &["B", "A"],
    &["B", "BB"],
    &["A", "BB"],
    &["A", "BA"],
    &["B", "BA"],
    &["B", "AA"],
    &["A", "AA"],
    &["BB", "BB"],
    &["BA", "BB"],
    &["AA", "BB"],
    &["AA", "BA"],
    &["BA", "BA"],
    &["BB", "BA"],
    &["BB", "AA"],
    &["BA", "AA"],
    &["AA", "AA"],
];

/// Placement pattern of case `id`, or `None` outside `0..25`.
pub fn case_config(id: usize) -> Option<CaseConfig> {
    let spots = CASES
        .get(id)?
        .iter()
        .map(|v| {
            v.chars()
                .map(|c| {
                    if c == 'B' {
                        Placement::Before
                    } else {
                        Placement::After
                    }
                })
                .collect()
        })
        .collect();
    Some(CaseConfig { id, spots })
}

pub fn all_cases() -> Vec<CaseConfig> {
    (0..CASE_COUNT).filter_map(case_config).collect()
}

/// Formal classification of a placement pattern.
pub fn classify(cfg: &CaseConfig) -> Prefetchability {
    let prefetchable = cfg.spots.iter().all(|v| v.contains(&Placement::Before));
    if !prefetchable {
        return Prefetchability::NonPrefetchable;
    }
    if cfg.spots.iter().flatten().any(|p| *p == Placement::After) {
        Prefetchability::NonHit
    } else {
        Prefetchability::Hit
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedCase {
    pub config: CaseConfig,
    pub app: App,
    pub trace: Trace,
    pub net: NetModel,
    pub expected: Prefetchability,
}

fn tag(i: usize, j: usize) -> String {
    format!("v{}_{}", i + 1, j + 1)
}

fn value(i: usize, j: usize, p: Placement) -> String {
    let side = if p == Placement::Before { 'b' } else { 'a' };
    format!("{}{side}{}", i + 1, j + 1)
}

/// Builds case `id`: `launch` holds the Before spots and ends at the Trigger Point, `show`
/// redefines the After spots and then fetches the URL.
pub fn generate_case_with(id: usize, latency_ms: u64, think_ms: u64) -> Option<GeneratedCase> {
    let config = case_config(id)?;
    let mut launch = Vec::new();
    let mut show = Vec::new();
    let mut launch_step = Step::new("launch", 0);
    let mut show_step = Step::new("show", think_ms);
    for (i, spots) in config.spots.iter().enumerate() {
        for (j, p) in spots.iter().enumerate() {
            let def = format!("    let v{} = input({})", i + 1, tag(i, j));
            match p {
                Placement::Before => {
                    launch.push(def);
                    launch_step = launch_step.input(tag(i, j), value(i, j, *p));
                }
                Placement::After => {
                    show.push(def);
                    show_step = show_step.input(tag(i, j), value(i, j, *p));
                }
            }
        }
    }
    let mut url = format!("resource(host) + \"case{id}\"");
    for i in 0..config.k() {
        let sep = if i == 0 { '?' } else { '&' };
        url.push_str(&format!(" + \"{sep}p{n}=\" + v{n}", n = i + 1));
    }
    show.push(format!("    url {URL} = {url}"));
    show.push(format!("    {FETCH}({URL})"));

    let src = format!(
        "app mbm_case{id}\n\
         resource host = \"http://mbm.test/\"\n\
         netmethod {FETCH} latency={latency_ms}\n\
         callback launch {{\n{launch}\n}}\n\
         callback show {{\n{show}\n}}\n\
         ccfg {{\n    wait wn\n    launch -> wn;\n    wn -> show;\n}}\n",
        launch = launch.join("\n"),
        show = show.join("\n"),
    );
    let app = parse_app(&src).expect("generated benchmark app parses");
    let expected = classify(&config);
    Some(GeneratedCase {
        config,
        app,
        trace: Trace::new(vec![launch_step, show_step]),
        net: NetModel::with_default_latency(latency_ms),
        expected,
    })
}

pub fn generate_case(id: usize) -> Option<GeneratedCase> {
    generate_case_with(id, DEFAULT_LATENCY_MS, DEFAULT_THINK_MS)
}

/// Outcome category read off an optimized run of a benchmark app.
pub fn observed_outcome(log: &RunLog) -> Prefetchability {
    let Some(demand) = log.demands().find(|d| d.url_id == URL) else {
        return Prefetchability::NonPrefetchable;
    };
    if demand.served_from.is_hit() {
        return Prefetchability::Hit;
    }
    if log.prefetches().any(|(id, _)| id == URL) {
        Prefetchability::NonHit
    } else {
        Prefetchability::NonPrefetchable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub case: usize,
    pub pattern: String,
    /// `None` when no `send_definition` ran.
    pub sd_ms: Option<u64>,
    pub tp_ms: u64,
    /// Proxy call cost plus the demanded response time.
    pub ffp_ms: u64,
    pub orig_ms: u64,
    pub opt_ms: u64,
    pub reduction_pct: f64,
    pub served_from: ServedFrom,
    pub expected: Prefetchability,
    pub observed: Prefetchability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub latency_ms: u64,
    pub think_ms: u64,
    pub rows: Vec<BenchRow>,
    pub accuracy: Accuracy,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("benchmark case {case}: {message}")]
pub struct BenchError {
    pub case: usize,
    pub message: String,
}

fn demand_time(log: &RunLog) -> Option<(u64, ServedFrom)> {
    log.demands()
        .find(|d| d.url_id == URL)
        .map(|d| (d.response_time_ms, d.served_from))
}

/// Result of running one case.
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub row: BenchRow,
    pub base: RunLog,
    pub opt: RunLog,
    pub accuracy: Accuracy,
}

/// Runs one case: original and instrumented, scored against the ground-truth oracle.
pub fn run_case(case: &GeneratedCase, costs: PseudoCosts) -> Result<CaseRun, BenchError> {
    let id = case.config.id;
    let err = |message: String| BenchError { case: id, message };
    let net = NetModel {
        costs,
        ..case.net.clone()
    };
    let map = analyze_urls(&case.app).map_err(|e| err(e.to_string()))?;
    let sig = FetchSignature::new(FETCH);
    let tm = identify_trigger_callbacks(&case.app, &case.app.ccfg, &build_ecg(&case.app), &sig);
    let ia = instrument(&case.app, &map, &tm, &sig).map_err(|e| err(e.to_string()))?;
    let base =
        run_trace(&case.app, &case.trace, &net, &map, None).map_err(|e| err(e.to_string()))?;
    let opt = run_trace(&ia.app, &case.trace, &net, &map, None).map_err(|e| err(e.to_string()))?;
    let oracle = ground_truth_oracle(&ia.app, &case.trace, &map, None, net.threshold)
        .map_err(|e| err(e.to_string()))?;
    let accuracy = compute_accuracy(&opt, &oracle).map_err(|e| err(e.to_string()))?;

    let (orig_ms, _) = demand_time(&base).ok_or_else(|| err("no demand in original run".into()))?;
    let (resp_ms, served_from) =
        demand_time(&opt).ok_or_else(|| err("no demand in optimized run".into()))?;
    let o = opt.overhead;
    let ffp_ms = o.fetch_from_proxy_ms + resp_ms;
    let opt_ms = o.send_definition_ms + o.trigger_prefetch_ms + ffp_ms;
    let reduction_pct = if orig_ms == 0 {
        0.0
    } else {
        (orig_ms as f64 - opt_ms as f64) / orig_ms as f64 * 100.0
    };
    let row = BenchRow {
        case: id,
        pattern: case.config.pattern(),
        sd_ms: (o.send_definition_calls > 0).then_some(o.send_definition_ms),
        tp_ms: o.trigger_prefetch_ms,
        ffp_ms,
        orig_ms,
        opt_ms,
        reduction_pct,
        served_from,
        expected: case.expected,
        observed: observed_outcome(&opt),
    };
    Ok(CaseRun {
        row,
        base,
        opt,
        accuracy,
    })
}

/// Runs all 25 cases with zero instrumentation cost.
pub fn run_benchmark(latency_ms: u64, think_ms: u64) -> Result<BenchReport, BenchError> {
    run_benchmark_with(latency_ms, think_ms, PseudoCosts::default())
}

pub fn run_benchmark_with(
    latency_ms: u64,
    think_ms: u64,
    costs: PseudoCosts,
) -> Result<BenchReport, BenchError> {
    let mut rows = Vec::with_capacity(CASE_COUNT);
    let mut accuracy = Accuracy::default();
    for id in 0..CASE_COUNT {
        let case = generate_case_with(id, latency_ms, think_ms).expect("id in range");
        let run = run_case(&case, costs)?;
        accuracy.merge(&run.accuracy);
        rows.push(run.row);
    }
    Ok(BenchReport {
        latency_ms,
        think_ms,
        rows,
        accuracy,
    })
}

impl BenchReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("Case\tSD\tTP\tFFP\tOrig\tOpt\tRed/OH\tExpected\tObserved\n");
        for r in &self.rows {
            let sd = r.sd_ms.map_or("N/A".to_string(), |v| v.to_string());
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{:.2}%\t{}\t{}\n",
                r.case,
                sd,
                r.tp_ms,
                r.ffp_ms,
                r.orig_ms,
                r.opt_ms,
                r.reduction_pct,
                r.expected,
                r.observed
            ));
        }
        out
    }

    pub fn hit_cases(&self) -> Vec<usize> {
        self.rows
            .iter()
            .filter(|r| r.observed == Prefetchability::Hit)
            .map(|r| r.case)
            .collect()
    }
}

/// Number of prefetches a run issued for the benchmark URL.
pub fn prefetch_count(log: &RunLog) -> usize {
    log.events
        .iter()
        .filter(|e| matches!(e, Event::Prefetch { url_id, .. } if url_id == URL))
        .count()
}
