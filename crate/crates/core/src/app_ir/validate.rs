use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::ast::{App, Stmt, UrlPart};

/// A single problem found while parsing or validating an app.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    pub fn at(line: usize, message: impl Into<String>) -> Self {
        Diagnostic {
            line: Some(line),
            message: message.into(),
        }
    }

    pub fn new(message: impl Into<String>) -> Self {
        Diagnostic {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseError {
    pub fn new(diagnostics: Vec<Diagnostic>) -> Self {
        ParseError { diagnostics }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Source location of an app element, indexed in program order.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Loc {
    Body(usize),
    Stmt(usize, usize),
    NetMethod(usize),
    Wait(usize),
    Edge(usize),
}

/// Checks the structural invariants of an app built in memory.
pub fn validate(app: &App) -> Result<(), ParseError> {
    validate_with(app, &|_| None).map_err(ParseError::new)
}

pub(crate) fn validate_with(
    app: &App,
    line_of: &dyn Fn(Loc) -> Option<usize>,
) -> Result<(), Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut push = |loc: Loc, msg: String| {
        diags.push(Diagnostic {
            line: line_of(loc),
            message: msg,
        })
    };

    let mut names = BTreeSet::new();
    for (i, b) in app.bodies().enumerate() {
        if !names.insert(b.name.as_str()) {
            push(Loc::Body(i), format!("duplicate name `{}`", b.name));
        }
    }
    let mut net_names = BTreeSet::new();
    for (i, n) in app.netlib.iter().enumerate() {
        if !net_names.insert(n.name.as_str()) {
            push(
                Loc::NetMethod(i),
                format!("duplicate netmethod `{}`", n.name),
            );
        }
    }
    let mut waits = BTreeSet::new();
    for (i, w) in app.ccfg.waits.iter().enumerate() {
        if !waits.insert(w.as_str()) || names.contains(w.as_str()) {
            push(Loc::Wait(i), format!("duplicate name `{w}`"));
        }
    }

    let mut defined_vars = BTreeSet::new();
    let mut url_arity: BTreeMap<&str, usize> = BTreeMap::new();
    for (bi, b) in app.bodies().enumerate() {
        for (si, s) in b.stmts.iter().enumerate() {
            if let Some(v) = s.defined_var() {
                defined_vars.insert(v);
            }
            if let Stmt::BuildUrl { url, parts } = s {
                if url_arity.insert(url, parts.len()).is_some() {
                    push(Loc::Stmt(bi, si), format!("duplicate url spot for `{url}`"));
                }
            }
        }
    }

    for (bi, b) in app.bodies().enumerate() {
        for (si, s) in b.stmts.iter().enumerate() {
            let loc = Loc::Stmt(bi, si);
            if s.is_pseudo() && !app.instrumented {
                push(loc, format!("`{s}` is only allowed in an instrumented app"));
            }
            let check_url = |url: &str, push: &mut dyn FnMut(Loc, String)| {
                if !url_arity.contains_key(url) {
                    push(loc, format!("unresolved url `{url}`"));
                }
            };
            let check_net = |m: &str, push: &mut dyn FnMut(Loc, String)| {
                if !net_names.contains(m) {
                    push(loc, format!("unresolved netmethod `{m}`"));
                }
            };
            match s {
                Stmt::DefineStatic { .. } | Stmt::DefineDynamic { .. } => {}
                Stmt::BuildUrl { parts, .. } => {
                    if parts.is_empty() {
                        push(loc, "url spot with no parts".into());
                    }
                    for p in parts {
                        if let UrlPart::Var(v) = p {
                            if !defined_vars.contains(v.as_str()) {
                                push(loc, format!("unresolved variable `{v}`"));
                            }
                        }
                    }
                }
                Stmt::NetCall { method, url } | Stmt::FetchFromProxy { method, url } => {
                    check_net(method, &mut push);
                    check_url(url, &mut push);
                }
                Stmt::Call(m) | Stmt::AsyncCall(m) => {
                    if !names.contains(m.as_str()) {
                        push(loc, format!("unresolved method `{m}`"));
                    }
                }
                Stmt::Transition(c) => {
                    if !app.is_callback(c) {
                        push(loc, format!("unresolved callback `{c}`"));
                    }
                }
                Stmt::SendDefinition { var, url, m } => {
                    if !defined_vars.contains(var.as_str()) {
                        push(loc, format!("unresolved variable `{var}`"));
                    }
                    match url_arity.get(url.as_str()) {
                        None => push(loc, format!("unresolved url `{url}`")),
                        Some(&n) if *m == 0 || *m > n => {
                            push(loc, format!("url `{url}` has no part {m}"))
                        }
                        Some(_) => {}
                    }
                }
                Stmt::TriggerPrefetch(urls) => {
                    for u in urls {
                        check_url(u, &mut push);
                    }
                }
            }
        }
    }

    let node_exists = |n: &str| app.is_callback(n) || waits.contains(n);
    for (i, (a, b)) in app.ccfg.edges.iter().enumerate() {
        for n in [a, b] {
            if !node_exists(n) {
                push(Loc::Edge(i), format!("unknown ccfg node `{n}`"));
            }
        }
    }
    for (i, w) in app.ccfg.waits.iter().enumerate() {
        let has_in = app.ccfg.predecessors(w).next().is_some();
        let has_out = app.ccfg.successors(w).next().is_some();
        if !has_in || !has_out {
            push(
                Loc::Wait(i),
                format!("wait node `{w}` needs at least one incoming and one outgoing edge"),
            );
        }
    }

    if diags.is_empty() {
        Ok(())
    } else {
        Err(diags)
    }
}
