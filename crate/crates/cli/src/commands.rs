use std::path::{Path, PathBuf};

use apprefetch::app_ir::{build_ecg, App};
use apprefetch::callback_analysis::{
    identify_trigger_callbacks, profile_fetch_signature, FetchSignature, TriggerMap,
};
use apprefetch::instrument::{apply_hints, instrument, Hints};
use apprefetch::mbm::run_benchmark_with;
use apprefetch::metrics::{
    compute_accuracy, compute_effectiveness, ground_truth_oracle, summarize, Oracle,
};
use apprefetch::runtime::{run_trace, NetModel, PseudoCosts, RunLog, Trace};
use apprefetch::string_analysis::{analyze_urls, UrlMap};
use serde_json::{json, Value};

use crate::io::{read_app, read_json, to_json, write_text, CmdResult, Fail};

/// What a command reports on stdout, in both renderings.
pub struct Outcome {
    pub human: String,
    pub json: Value,
}

pub const URLMAP_FILE: &str = "urlmap.json";
pub const TRIGGERMAP_FILE: &str = "triggermap.json";
pub const SIGNATURE_FILE: &str = "signature.json";

fn load_net(path: Option<&Path>) -> CmdResult<NetModel> {
    path.map_or_else(|| Ok(NetModel::default()), read_json)
}

fn load_hints(path: Option<&Path>) -> CmdResult<Option<Hints>> {
    path.map(read_json).transpose()
}

fn pick_signature(
    app: &App,
    trace: Option<&Path>,
    net: &NetModel,
    explicit: Option<&str>,
) -> CmdResult<FetchSignature> {
    if let Some(name) = explicit {
        if app.netmethod(name).is_none() {
            return Err(Fail::usage(format!(
                "--signature `{name}` is not a declared netmethod"
            )));
        }
        return Ok(FetchSignature::new(name));
    }
    if let Some(path) = trace {
        let trace: Trace = read_json(path)?;
        return profile_fetch_signature(app, &trace, net)
            .map_err(|e| Fail::analysis(e.to_string()));
    }
    match app.netlib.as_slice() {
        [only] => Ok(FetchSignature::new(&only.name)),
        _ => Err(Fail::usage(
            "app declares several netmethods: pass --signature <name> or --trace <file> to profile",
        )),
    }
}

pub struct AnalyzeArgs<'a> {
    pub app: &'a Path,
    pub trace: Option<&'a Path>,
    pub net: Option<&'a Path>,
    pub signature: Option<&'a str>,
    pub out_dir: &'a Path,
}

pub fn analyze(a: AnalyzeArgs<'_>) -> CmdResult<Outcome> {
    let app = read_app(a.app)?;
    let net = load_net(a.net)?;
    let map = analyze_urls(&app).map_err(|e| Fail::analysis(e.to_string()))?;
    let sig = pick_signature(&app, a.trace, &net, a.signature)?;
    let tm = identify_trigger_callbacks(&app, &app.ccfg, &build_ecg(&app), &sig);
    let paths = [
        a.out_dir.join(URLMAP_FILE),
        a.out_dir.join(TRIGGERMAP_FILE),
        a.out_dir.join(SIGNATURE_FILE),
    ];
    write_text(&paths[0], &to_json(&map))?;
    write_text(&paths[1], &to_json(&tm))?;
    write_text(&paths[2], &to_json(&sig))?;
    let human = format!(
        "signature: {}\nurls: {} ({} with runtime parts)\ntrigger callbacks: {}\nwrote {}\n",
        sig.method(),
        map.entries.len(),
        map.entries
            .keys()
            .filter(|u| !map.is_fully_static(u))
            .count(),
        tm.entries.keys().cloned().collect::<Vec<_>>().join(", "),
        paths
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(", "),
    );
    Ok(Outcome {
        human,
        json: json!({
            "signature": sig.method(),
            "urlmap": map,
            "triggermap": tm,
            "written": paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        }),
    })
}

pub struct InstrumentArgs<'a> {
    pub app: &'a Path,
    pub urlmap: &'a Path,
    pub triggermap: &'a Path,
    pub signature: Option<&'a str>,
    pub signature_file: Option<&'a Path>,
    pub hints: Option<&'a Path>,
    pub out: &'a Path,
}

pub fn instrument_cmd(a: InstrumentArgs<'_>) -> CmdResult<Outcome> {
    let app = read_app(a.app)?;
    let map: UrlMap = read_json(a.urlmap)?;
    let tm: TriggerMap = read_json(a.triggermap)?;
    let sig = match (a.signature, a.signature_file) {
        (Some(name), None) => FetchSignature::new(name),
        (None, Some(path)) => read_json(path)?,
        _ => {
            return Err(Fail::usage(
                "pass exactly one of --signature or --signature-file",
            ))
        }
    };
    let mut ia = instrument(&app, &map, &tm, &sig).map_err(|e| Fail::analysis(e.to_string()))?;
    if let Some(hints) = load_hints(a.hints)? {
        ia = apply_hints(ia, &hints).map_err(|e| Fail::analysis(e.to_string()))?;
    }
    write_text(a.out, &ia.app.to_string())?;
    Ok(Outcome {
        human: format!(
            "inserted or replaced {} statements\nwrote {}\n",
            ia.provenance.len(),
            a.out.display()
        ),
        json: json!({
            "provenance": ia.provenance,
            "written": a.out.display().to_string(),
        }),
    })
}

pub struct RunArgs<'a> {
    pub app: &'a Path,
    pub trace: &'a Path,
    pub net: Option<&'a Path>,
    pub seed_urlmap: Option<&'a Path>,
    pub hints: Option<&'a Path>,
    pub threshold: Option<usize>,
    pub latency_ms: Option<u64>,
    pub out: &'a Path,
    pub oracle_out: Option<&'a Path>,
}

pub fn run(a: RunArgs<'_>) -> CmdResult<Outcome> {
    let app = read_app(a.app)?;
    let trace: Trace = read_json(a.trace)?;
    let mut net = load_net(a.net)?;
    if let Some(t) = a.threshold {
        net.threshold = t;
    }
    if let Some(l) = a.latency_ms {
        net.default_latency_ms = Some(l);
    }
    let hints = load_hints(a.hints)?;
    let seed = match a.seed_urlmap {
        Some(p) => read_json(p)?,
        None if app.instrumented => {
            analyze_urls(&app).map_err(|e| Fail::analysis(e.to_string()))?
        }
        None => UrlMap::default(),
    };
    let log = run_trace(&app, &trace, &net, &seed, hints.as_ref())
        .map_err(|e| Fail::analysis(e.to_string()))?;
    write_text(a.out, &to_json(&log))?;
    let mut written = vec![a.out.display().to_string()];
    if let Some(path) = a.oracle_out {
        let oracle = ground_truth_oracle(&app, &trace, &seed, hints.as_ref(), net.threshold)
            .map_err(|e| Fail::analysis(e.to_string()))?;
        write_text(path, &to_json(&oracle))?;
        written.push(path.display().to_string());
    }
    let demands = log.demands().count();
    let hits = log.demands().filter(|d| d.served_from.is_hit()).count();
    Ok(Outcome {
        human: format!(
            "{demands} requests, {hits} served by prefetch, session ends at {} ms\nwrote {}\n",
            log.end_ms,
            written.join(", ")
        ),
        json: json!({
            "requests": demands,
            "hits": hits,
            "prefetches": log.prefetches().count(),
            "end_ms": log.end_ms,
            "written": written,
        }),
    })
}

pub struct BenchArgs<'a> {
    pub latency_ms: u64,
    pub think_ms: u64,
    pub costs: PseudoCosts,
    pub out: Option<&'a Path>,
}

pub fn bench(a: BenchArgs<'_>) -> CmdResult<Outcome> {
    let report = run_benchmark_with(a.latency_ms, a.think_ms, a.costs)
        .map_err(|e| Fail::analysis(e.to_string()))?;
    let tsv = report.to_tsv();
    if let Some(path) = a.out {
        let is_tsv = path.extension().is_some_and(|e| e == "tsv");
        write_text(
            path,
            &if is_tsv {
                tsv.clone()
            } else {
                to_json(&report)
            },
        )?;
    }
    let acc = report.accuracy;
    Ok(Outcome {
        human: format!(
            "{tsv}precision {:.2}, recall {:.2}\n",
            acc.precision(),
            acc.recall()
        ),
        json: json!({
            "report": report,
            "precision": acc.precision(),
            "recall": acc.recall(),
        }),
    })
}

pub struct ReportArgs<'a> {
    pub base: &'a [PathBuf],
    pub opt: &'a [PathBuf],
    pub oracle: &'a [PathBuf],
    pub out: Option<&'a Path>,
}

pub fn report(a: ReportArgs<'_>) -> CmdResult<Outcome> {
    if a.base.len() != a.opt.len() || a.base.is_empty() {
        return Err(Fail::usage(
            "pass matching, non-empty lists of --base and --opt run logs",
        ));
    }
    if !a.oracle.is_empty() && a.oracle.len() != a.base.len() {
        return Err(Fail::usage(
            "pass one --oracle per --base/--opt pair, or none",
        ));
    }
    let mut sessions = Vec::with_capacity(a.base.len());
    for (i, (b, o)) in a.base.iter().zip(a.opt).enumerate() {
        let base: RunLog = read_json(b)?;
        let opt: RunLog = read_json(o)?;
        let mut m =
            compute_effectiveness(&base, &opt).map_err(|e| Fail::analysis(e.to_string()))?;
        if let Some(path) = a.oracle.get(i) {
            let oracle: Oracle = read_json(path)?;
            m.accuracy =
                Some(compute_accuracy(&opt, &oracle).map_err(|e| Fail::analysis(e.to_string()))?);
        }
        sessions.push(m);
    }
    let summary = summarize(&sessions);
    let doc = json!({ "sessions": sessions, "summary": summary });
    if let Some(path) = a.out {
        write_text(path, &to_json(&doc))?;
    }
    let mut human = summary.to_table();
    for (i, m) in sessions.iter().enumerate() {
        human.push_str(&format!(
            "session {i}: {} requests, hit rate {:.2}%",
            m.requests.len(),
            m.hit_rate * 100.0
        ));
        if let Some(acc) = m.accuracy {
            human.push_str(&format!(
                ", precision {:.2}, recall {:.2}",
                acc.precision(),
                acc.recall()
            ));
        }
        human.push('\n');
    }
    Ok(Outcome { human, json: doc })
}

pub struct PipelineArgs<'a> {
    pub app: &'a Path,
    pub trace: &'a Path,
    pub net: Option<&'a Path>,
    pub hints: Option<&'a Path>,
    pub signature: Option<&'a str>,
    pub out_dir: &'a Path,
}

pub const OPT_APP_FILE: &str = "app.opt.papp";
pub const BASE_LOG_FILE: &str = "base.runlog.json";
pub const OPT_LOG_FILE: &str = "opt.runlog.json";
pub const ORACLE_FILE: &str = "oracle.json";
pub const METRICS_FILE: &str = "metrics.json";

/// analyze → instrument → run (original) → run (optimized) → report, through the same code
/// paths and files the individual subcommands use.
pub fn pipeline(a: PipelineArgs<'_>) -> CmdResult<Outcome> {
    let dir = a.out_dir;
    analyze(AnalyzeArgs {
        app: a.app,
        trace: Some(a.trace),
        net: a.net,
        signature: a.signature,
        out_dir: dir,
    })?;
    let opt_app = dir.join(OPT_APP_FILE);
    instrument_cmd(InstrumentArgs {
        app: a.app,
        urlmap: &dir.join(URLMAP_FILE),
        triggermap: &dir.join(TRIGGERMAP_FILE),
        signature: None,
        signature_file: Some(&dir.join(SIGNATURE_FILE)),
        hints: a.hints,
        out: &opt_app,
    })?;
    run(RunArgs {
        app: a.app,
        trace: a.trace,
        net: a.net,
        seed_urlmap: None,
        hints: None,
        threshold: None,
        latency_ms: None,
        out: &dir.join(BASE_LOG_FILE),
        oracle_out: None,
    })?;
    run(RunArgs {
        app: &opt_app,
        trace: a.trace,
        net: a.net,
        seed_urlmap: Some(&dir.join(URLMAP_FILE)),
        hints: a.hints,
        threshold: None,
        latency_ms: None,
        out: &dir.join(OPT_LOG_FILE),
        oracle_out: Some(&dir.join(ORACLE_FILE)),
    })?;
    report(ReportArgs {
        base: &[dir.join(BASE_LOG_FILE)],
        opt: &[dir.join(OPT_LOG_FILE)],
        oracle: &[dir.join(ORACLE_FILE)],
        out: Some(&dir.join(METRICS_FILE)),
    })
}
