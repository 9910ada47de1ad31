use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn apprefetch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apprefetch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn analyze_weather_writes_maps() {
    let dir = TempDir::new().unwrap();
    let out = apprefetch(&[
        "analyze",
        s(&fixture("weather.papp")),
        "--out-dir",
        s(dir.path()),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    let tm = read_json(&dir.path().join("triggermap.json"));
    let all = serde_json::json!(["url1", "url2", "url3"]);
    assert_eq!(
        tm,
        serde_json::json!({ "onCreate": all, "onItemSelected": all })
    );

    let map = read_json(&dir.path().join("urlmap.json"));
    let url2 = &map["url2"];
    assert_eq!(url2.as_array().unwrap().len(), 3);
    let spots = &url2[2];
    let text = spots.to_string();
    assert!(text.contains("onItemSelected"), "{text}");

    let sig = read_json(&dir.path().join("signature.json"));
    assert_eq!(sig["signature"], "getInputStream");
}

fn manual_steps(dir: &Path) {
    let app = fixture("weather.papp");
    let trace = fixture("weather.trace.json");
    let net = fixture("weather.net.json");
    let p = |f: &str| dir.join(f);
    let steps: Vec<Vec<String>> = vec![
        vec![
            "analyze",
            s(&app),
            "--trace",
            s(&trace),
            "--net",
            s(&net),
            "--out-dir",
            s(dir),
        ],
        vec![
            "instrument",
            s(&app),
            "--urlmap",
            s(&p("urlmap.json")),
            "--triggermap",
            s(&p("triggermap.json")),
            "--signature-file",
            s(&p("signature.json")),
            "--out",
            s(&p("app.opt.papp")),
        ],
        vec![
            "run",
            "--app",
            s(&app),
            "--trace",
            s(&trace),
            "--net",
            s(&net),
            "--out",
            s(&p("base.runlog.json")),
        ],
        vec![
            "run",
            "--app",
            s(&p("app.opt.papp")),
            "--trace",
            s(&trace),
            "--net",
            s(&net),
            "--seed-urlmap",
            s(&p("urlmap.json")),
            "--out",
            s(&p("opt.runlog.json")),
            "--oracle-out",
            s(&p("oracle.json")),
        ],
        vec![
            "report",
            "--base",
            s(&p("base.runlog.json")),
            "--opt",
            s(&p("opt.runlog.json")),
            "--oracle",
            s(&p("oracle.json")),
            "--out",
            s(&p("metrics.json")),
        ],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    for args in steps {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = apprefetch(&args);
        assert!(out.status.success(), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn pipeline_matches_manual_steps_byte_for_byte() {
    let manual = TempDir::new().unwrap();
    let piped = TempDir::new().unwrap();
    manual_steps(manual.path());
    let out = apprefetch(&[
        "pipeline",
        s(&fixture("weather.papp")),
        "--trace",
        s(&fixture("weather.trace.json")),
        "--net",
        s(&fixture("weather.net.json")),
        "--out-dir",
        s(piped.path()),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for f in [
        "urlmap.json",
        "triggermap.json",
        "signature.json",
        "app.opt.papp",
        "base.runlog.json",
        "opt.runlog.json",
        "oracle.json",
        "metrics.json",
    ] {
        let a = fs::read(manual.path().join(f)).unwrap();
        let b = fs::read(piped.path().join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
    let metrics = read_json(&piped.path().join("metrics.json"));
    let session = &metrics["sessions"][0];
    assert_eq!(session["hit_rate"].as_f64().unwrap(), 2.0 / 3.0);
}

#[test]
fn bench_writes_25_row_tsv() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("mbm.tsv");
    let out = apprefetch(&[
        "bench",
        "--latency-ms",
        "1000",
        "--think-ms",
        "2000",
        "--out",
        s(&path),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let tsv = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines.len(), 26);
    assert!(lines[0].starts_with("Case\t"));
    for case in [0, 1, 3, 6, 10, 16] {
        let row: Vec<&str> = lines[case + 1].split('\t').collect();
        assert_eq!(row[0], case.to_string());
        assert_eq!(row[6], "100.00%", "case {case}: {row:?}");
    }
}

#[test]
fn invalid_trace_step_exits_2() {
    let dir = TempDir::new().unwrap();
    let trace = dir.path().join("bad.json");
    fs::write(&trace, r#"[{"event":"onClick","think_ms":0,"inputs":{}}]"#).unwrap();
    let out = apprefetch(&[
        "run",
        "--app",
        s(&fixture("weather.papp")),
        "--trace",
        s(&trace),
        "--out",
        s(&dir.path().join("log.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("invalid trace step 0"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn missing_file_and_bad_json_exit_1() {
    let dir = TempDir::new().unwrap();
    let out = apprefetch(&["analyze", s(&dir.path().join("nope.papp"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("cannot read"));

    let trace = dir.path().join("trace.json");
    fs::write(&trace, "[{").unwrap();
    let out = apprefetch(&[
        "run",
        "--app",
        s(&fixture("weather.papp")),
        "--trace",
        s(&trace),
        "--out",
        s(&dir.path().join("log.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("malformed JSON"));

    let out = apprefetch(&["bench", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    let out = apprefetch(&[
        "run",
        "--app",
        "x",
        "--trace",
        "y",
        "--out",
        "z",
        "--threshold",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unparsable_app_exits_2() {
    let dir = TempDir::new().unwrap();
    let app = dir.path().join("bad.papp");
    fs::write(&app, "app broken\ncallback {\n").unwrap();
    let out = apprefetch(&["analyze", s(&app), "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn json_flag_prints_machine_readable_summary() {
    let dir = TempDir::new().unwrap();
    let out = apprefetch(&[
        "--json",
        "analyze",
        s(&fixture("weather.papp")),
        "--out-dir",
        s(dir.path()),
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["signature"], "getInputStream");
    assert!(v["triggermap"]["onCreate"].is_array());

    let out = apprefetch(&["bench", "--json"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.is_object());
}
