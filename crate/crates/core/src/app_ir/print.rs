//! Pretty-printer producing `.papp` source that [`parse_app`](super::parse_app) accepts.

use std::fmt::{self, Write};

use super::ast::{App, Body, StaticSource, Stmt};

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stmt::DefineStatic { var, source } => match source {
                StaticSource::Literal(s) => write!(f, "let {var} = {}", quote(s)),
                StaticSource::Resource(k) => write!(f, "let {var} = resource({k})"),
                StaticSource::Setting(k) => write!(f, "let {var} = setting({k})"),
            },
            Stmt::DefineDynamic { var, tag } => write!(f, "let {var} = input({tag})"),
            Stmt::BuildUrl { url, parts } => {
                write!(f, "url {url} = ")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
            Stmt::NetCall { method, url } => write!(f, "{method}({url})"),
            Stmt::Call(m) => write!(f, "call {m}"),
            Stmt::AsyncCall(m) => write!(f, "asynccall {m}"),
            Stmt::Transition(c) => write!(f, "goto {c}"),
            Stmt::SendDefinition { var, url, m } => write!(f, "send_definition({var},{url},{m})"),
            Stmt::TriggerPrefetch(urls) => write!(f, "trigger_prefetch({})", urls.join(",")),
            Stmt::FetchFromProxy { method, url } => write!(f, "fetch_from_proxy({method},{url})"),
        }
    }
}

fn write_body(out: &mut String, keyword: &str, body: &Body) -> fmt::Result {
    if body.stmts.is_empty() {
        return writeln!(out, "{keyword} {} {{ }}", body.name);
    }
    writeln!(out, "{keyword} {} {{", body.name)?;
    for s in &body.stmts {
        writeln!(out, "    {s}")?;
    }
    writeln!(out, "}}")
}

impl fmt::Display for App {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        if self.instrumented {
            writeln!(out, "app {} instrumented", self.name)?;
        } else {
            writeln!(out, "app {}", self.name)?;
        }
        for (k, v) in &self.resources {
            writeln!(out, "resource {k} = {}", quote(v))?;
        }
        for (k, v) in &self.settings {
            writeln!(out, "setting {k} = {}", quote(v))?;
        }
        for n in &self.netlib {
            writeln!(out, "netmethod {} latency={}", n.name, n.latency_ms)?;
        }
        for c in &self.callbacks {
            write_body(&mut out, "callback", c)?;
        }
        for m in &self.methods {
            write_body(&mut out, "method", m)?;
        }
        if !self.ccfg.waits.is_empty() || !self.ccfg.edges.is_empty() {
            writeln!(out, "ccfg {{")?;
            for w in &self.ccfg.waits {
                writeln!(out, "    wait {w}")?;
            }
            for (a, b) in &self.ccfg.edges {
                writeln!(out, "    {a} -> {b};")?;
            }
            writeln!(out, "}}")?;
        }
        f.write_str(&out)
    }
}
