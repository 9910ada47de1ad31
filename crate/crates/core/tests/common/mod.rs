//! Seeded random apps and traces for property tests.
#![allow(dead_code)]
#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;

use apprefetch::app_ir::{App, Body, Ccfg, NetMethodDecl, StaticSource, Stmt, UrlPart};
use apprefetch::runtime::{NetModel, Step, Trace};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WEATHER_SRC: &str = include_str!("../../fixtures/weather.papp");
pub const FETCH: &str = "get";

const VALUES: [&str; 3] = ["p", "q", "r"];

pub struct Generated {
    pub app: App,
    pub trace: Trace,
    pub net: NetModel,
}

fn random_url(rng: &mut ChaCha8Rng, vars: usize) -> Vec<UrlPart> {
    let mut parts = vec![if rng.gen_bool(0.7) {
        UrlPart::Resource("host".into())
    } else {
        UrlPart::Literal("http://lit/".into())
    }];
    for _ in 0..rng.gen_range(0..=3) {
        if rng.gen_bool(0.6) {
            parts.push(UrlPart::Var(format!("x{}", rng.gen_range(0..vars))));
        } else {
            parts.push(UrlPart::Literal(
                ["a/", "b?", "&c="][rng.gen_range(0..3)].into(),
            ));
        }
    }
    parts
}

fn random_def(rng: &mut ChaCha8Rng, var: usize) -> Stmt {
    let var = format!("x{var}");
    if rng.gen_bool(0.3) {
        Stmt::DefineStatic {
            var,
            source: StaticSource::Literal(["s", "t"][rng.gen_range(0..2)].into()),
        }
    } else {
        Stmt::DefineDynamic {
            tag: format!("t_{var}"),
            var,
        }
    }
}

/// A small valid app with one net method, plus a valid trace over it.
pub fn generate(seed: u64) -> Generated {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_cb = rng.gen_range(2..=5);
    let n_m = rng.gen_range(0..=2);
    let n_vars = rng.gen_range(1..=3);
    let mut next_url = 0;

    let mut bodies: Vec<Body> = (0..n_cb)
        .map(|i| Body::new(format!("c{i}"), vec![]))
        .chain((0..n_m).map(|i| Body::new(format!("m{i}"), vec![])))
        .collect();
    for b in 0..bodies.len() {
        let is_method = b >= n_cb;
        for _ in 0..rng.gen_range(0..=4) {
            let stmt_kind = rng.gen_range(0..10);
            let stmts = &mut bodies[b].stmts;
            match stmt_kind {
                0..=3 => {
                    let v = rng.gen_range(0..n_vars);
                    stmts.push(random_def(&mut rng, v))
                }
                4..=6 => {
                    let url = format!("u{next_url}");
                    next_url += 1;
                    stmts.push(Stmt::BuildUrl {
                        url: url.clone(),
                        parts: random_url(&mut rng, n_vars),
                    });
                    stmts.push(Stmt::NetCall {
                        method: FETCH.into(),
                        url: url.clone(),
                    });
                    if rng.gen_bool(0.2) {
                        stmts.push(Stmt::NetCall {
                            method: FETCH.into(),
                            url,
                        });
                    }
                }
                _ => {
                    // Methods only call later methods, so there is no recursion.
                    let first = if is_method { b - n_cb + 1 } else { 0 };
                    if first < n_m {
                        let target = format!("m{}", rng.gen_range(first..n_m));
                        stmts.push(if rng.gen_bool(0.5) {
                            Stmt::Call(target)
                        } else {
                            Stmt::AsyncCall(target)
                        });
                    }
                }
            }
        }
    }
    // Every variable needs at least one definition somewhere.
    for v in 0..n_vars {
        let name = format!("x{v}");
        if !bodies
            .iter()
            .flat_map(|b| &b.stmts)
            .any(|s| s.defined_var() == Some(name.as_str()))
        {
            let b = rng.gen_range(0..bodies.len());
            let at = rng.gen_range(0..=bodies[b].stmts.len());
            let def = random_def(&mut rng, v);
            bodies[b].stmts.insert(at, def);
        }
    }

    // CCFG: every callback leads to a wait node; waits lead to callbacks other than c0.
    let n_waits = rng.gen_range(1..=2);
    let waits: Vec<String> = (0..n_waits).map(|i| format!("w{i}")).collect();
    let mut edges = Vec::new();
    for c in 0..n_cb {
        edges.push((format!("c{c}"), waits[rng.gen_range(0..n_waits)].clone()));
    }
    for w in &waits {
        if !edges.iter().any(|(_, to)| to == w) {
            edges.push(("c0".to_string(), w.clone()));
        }
        let mut targets: Vec<usize> = (1..n_cb).filter(|_| rng.gen_bool(0.6)).collect();
        if targets.is_empty() {
            targets.push(rng.gen_range(1..n_cb));
        }
        for t in targets {
            edges.push((w.clone(), format!("c{t}")));
        }
    }
    // Occasional screen change at the end of a callback, always to a later callback.
    for c in 0..n_cb - 1 {
        if rng.gen_bool(0.15) {
            let target = format!("c{}", rng.gen_range(c + 1..n_cb));
            edges.push((format!("c{c}"), target.clone()));
            bodies[c].stmts.push(Stmt::Transition(target));
        }
    }
    edges.dedup();

    let methods = bodies.split_off(n_cb);
    let app = App {
        name: format!("gen{seed}"),
        instrumented: false,
        resources: [("host".to_string(), format!("http://h{}/", seed % 3))].into(),
        settings: BTreeMap::new(),
        netlib: vec![NetMethodDecl {
            name: FETCH.into(),
            latency_ms: rng.gen_range(50..=1500),
        }],
        callbacks: bodies,
        methods,
        ccfg: Ccfg { waits, edges },
    };

    let trace = random_trace(&app, &mut rng, n_vars);
    let mut net = NetModel {
        threshold: rng.gen_range(1..=5),
        ..NetModel::default()
    };
    if rng.gen_bool(0.5) {
        net.server
            .insert("http://h0/a/".into(), "{\"fixed\":true}".into());
    }
    Generated { app, trace, net }
}

/// Callback the user is on after `event` ran, following trailing `goto`s.
pub fn settle(app: &App, event: &str) -> String {
    let mut at = event.to_string();
    while let Some(Stmt::Transition(next)) = app.callback(&at).and_then(|b| b.stmts.last()) {
        at = next.clone();
    }
    at
}

fn random_trace(app: &App, rng: &mut ChaCha8Rng, n_vars: usize) -> Trace {
    let inputs = |rng: &mut ChaCha8Rng| -> BTreeMap<String, String> {
        (0..n_vars)
            .map(|v| (format!("t_x{v}"), VALUES.choose(rng).unwrap().to_string()))
            .collect()
    };
    let mut steps = vec![Step {
        event: "c0".into(),
        think_ms: rng.gen_range(0..=1500),
        inputs: inputs(rng),
    }];
    let mut current = settle(app, "c0");
    for _ in 0..rng.gen_range(0..=7) {
        let next: Vec<&str> = app.ccfg.next_via_wait(&current).collect();
        let Some(event) = next.choose(rng).map(|s| s.to_string()) else {
            break;
        };
        steps.push(Step {
            event: event.clone(),
            think_ms: rng.gen_range(0..=2500),
            inputs: inputs(rng),
        });
        current = settle(app, &event);
    }
    Trace::new(steps)
}

/// Where the value of one URL part came from when its URL Spot executed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartOrigin {
    pub url: String,
    pub m: usize,
    /// `(container, stmt index)` of the last definition executed, if any.
    pub last_def: Option<(String, usize)>,
    pub value: Option<String>,
}

/// Independent walk over the original app recording, for every executed URL Spot, the last
/// definition of each variable part.
pub fn part_origins(app: &App, trace: &Trace) -> Vec<PartOrigin> {
    struct Walk<'a> {
        app: &'a App,
        defs: BTreeMap<String, ((String, usize), String)>,
        out: Vec<PartOrigin>,
    }
    impl Walk<'_> {
        fn body(&mut self, name: &str, inputs: &BTreeMap<String, String>, depth: usize) {
            assert!(depth < 64, "generator produced recursion");
            let body = self.app.body(name).expect("known body").clone();
            for (i, s) in body.stmts.iter().enumerate() {
                match s {
                    Stmt::DefineDynamic { var, tag } => {
                        self.defs
                            .insert(var.clone(), ((name.to_string(), i), inputs[tag].clone()));
                    }
                    Stmt::DefineStatic {
                        var,
                        source: StaticSource::Literal(l),
                    } => {
                        self.defs
                            .insert(var.clone(), ((name.to_string(), i), l.clone()));
                    }
                    Stmt::BuildUrl { url, parts } => {
                        for (k, p) in parts.iter().enumerate() {
                            if let UrlPart::Var(v) = p {
                                let d = self.defs.get(v);
                                self.out.push(PartOrigin {
                                    url: url.clone(),
                                    m: k + 1,
                                    last_def: d.map(|(loc, _)| loc.clone()),
                                    value: d.map(|(_, val)| val.clone()),
                                });
                            }
                        }
                    }
                    Stmt::Call(m) | Stmt::AsyncCall(m) | Stmt::Transition(m) => {
                        self.body(m, inputs, depth + 1)
                    }
                    _ => {}
                }
            }
        }
    }
    let mut w = Walk {
        app,
        defs: BTreeMap::new(),
        out: Vec::new(),
    };
    for step in &trace.steps {
        w.body(&step.event, &step.inputs, 0);
    }
    w.out
}
