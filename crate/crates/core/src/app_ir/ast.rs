//! Data model for the declarative app description.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Identifier of a URL built at a URL Spot (`url <id> = ...`).
pub type UrlId = String;

/// A whole app: resources, network library, callbacks, helpers and the CCFG.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct App {
    pub name: String,
    /// Set once the instrumenter has rewritten the app.
    pub instrumented: bool,
    pub resources: BTreeMap<String, String>,
    pub settings: BTreeMap<String, String>,
    pub netlib: Vec<NetMethodDecl>,
    pub callbacks: Vec<Body>,
    pub methods: Vec<Body>,
    pub ccfg: Ccfg,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetMethodDecl {
    pub name: String,
    pub latency_ms: u64,
}

/// A named statement list. Used for both callbacks and helper methods.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Body {
    pub name: String,
    pub stmts: Vec<Stmt>,
}

pub type Callback = Body;
pub type HelperMethod = Body;

impl Body {
    pub fn new(name: impl Into<String>, stmts: Vec<Stmt>) -> Self {
        Body {
            name: name.into(),
            stmts,
        }
    }
}

/// Where a statically defined variable takes its value from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticSource {
    Literal(String),
    Resource(String),
    Setting(String),
}

/// One operand of a URL concatenation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UrlPart {
    Literal(String),
    Resource(String),
    Var(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stmt {
    DefineStatic {
        var: String,
        source: StaticSource,
    },
    /// Value arrives from the trace input named `tag`.
    DefineDynamic {
        var: String,
        tag: String,
    },
    BuildUrl {
        url: UrlId,
        parts: Vec<UrlPart>,
    },
    NetCall {
        method: String,
        url: UrlId,
    },
    Call(String),
    AsyncCall(String),
    Transition(String),
    /// `m` is the 1-based part index inside `url`.
    SendDefinition {
        var: String,
        url: UrlId,
        m: usize,
    },
    TriggerPrefetch(Vec<UrlId>),
    FetchFromProxy {
        method: String,
        url: UrlId,
    },
}

impl Stmt {
    /// Variable assigned by this statement, if it is a definition.
    pub fn defined_var(&self) -> Option<&str> {
        match self {
            Stmt::DefineStatic { var, .. } | Stmt::DefineDynamic { var, .. } => Some(var),
            _ => None,
        }
    }

    pub fn is_pseudo(&self) -> bool {
        matches!(
            self,
            Stmt::SendDefinition { .. } | Stmt::TriggerPrefetch(_) | Stmt::FetchFromProxy { .. }
        )
    }
}

/// Callback control-flow graph. Nodes are callback names or declared wait nodes.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Ccfg {
    pub waits: Vec<String>,
    pub edges: Vec<(String, String)>,
}

impl Ccfg {
    pub fn is_wait(&self, node: &str) -> bool {
        self.waits.iter().any(|w| w == node)
    }

    pub fn successors<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges
            .iter()
            .filter(move |(from, _)| from == node)
            .map(|(_, to)| to.as_str())
    }

    pub fn predecessors<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges
            .iter()
            .filter(move |(_, to)| to == node)
            .map(|(from, _)| from.as_str())
    }

    /// Callbacks that can follow `from` through exactly one wait node.
    pub fn next_via_wait<'a>(&'a self, from: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.successors(from)
            .filter(|w| self.is_wait(w))
            .flat_map(move |w| self.successors(w))
            .filter(|n| !self.is_wait(n))
    }
}

impl App {
    pub fn callback(&self, name: &str) -> Option<&Body> {
        self.callbacks.iter().find(|c| c.name == name)
    }

    pub fn method(&self, name: &str) -> Option<&Body> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn is_callback(&self, name: &str) -> bool {
        self.callback(name).is_some()
    }

    /// Callback or helper method by name.
    pub fn body(&self, name: &str) -> Option<&Body> {
        self.callback(name).or_else(|| self.method(name))
    }

    pub fn body_mut(&mut self, name: &str) -> Option<&mut Body> {
        if let Some(i) = self.callbacks.iter().position(|c| c.name == name) {
            return Some(&mut self.callbacks[i]);
        }
        self.methods.iter_mut().find(|m| m.name == name)
    }

    /// All bodies in program order: callbacks in declaration order, then helper methods.
    pub fn bodies(&self) -> impl Iterator<Item = &Body> {
        self.callbacks.iter().chain(self.methods.iter())
    }

    pub fn bodies_mut(&mut self) -> impl Iterator<Item = &mut Body> {
        self.callbacks.iter_mut().chain(self.methods.iter_mut())
    }

    pub fn netmethod(&self, name: &str) -> Option<&NetMethodDecl> {
        self.netlib.iter().find(|n| n.name == name)
    }

    /// Every statement with its container name and index, in program order.
    pub fn statements(&self) -> impl Iterator<Item = (&str, usize, &Stmt)> {
        self.bodies().flat_map(|b| {
            b.stmts
                .iter()
                .enumerate()
                .map(move |(i, s)| (b.name.as_str(), i, s))
        })
    }

    /// URL parts of the unique URL Spot for `url`.
    pub fn url_spot(&self, url: &str) -> Option<&[UrlPart]> {
        self.statements().find_map(|(_, _, s)| match s {
            Stmt::BuildUrl { url: u, parts } if u == url => Some(parts.as_slice()),
            _ => None,
        })
    }

    /// Ids of all URLs built somewhere in the app, in program order.
    pub fn url_ids(&self) -> Vec<UrlId> {
        self.statements()
            .filter_map(|(_, _, s)| match s {
                Stmt::BuildUrl { url, .. } => Some(url.clone()),
                _ => None,
            })
            .collect()
    }

    /// Callbacks with no incoming CCFG edge; the first declared callback when none exist.
    pub fn entry_callbacks(&self) -> Vec<&str> {
        let entries: Vec<&str> = self
            .callbacks
            .iter()
            .map(|c| c.name.as_str())
            .filter(|c| self.ccfg.predecessors(c).next().is_none())
            .collect();
        if entries.is_empty() {
            self.callbacks
                .iter()
                .take(1)
                .map(|c| c.name.as_str())
                .collect()
        } else {
            entries
        }
    }
}

impl fmt::Display for UrlPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UrlPart::Literal(s) => write!(f, "{}", super::print::quote(s)),
            UrlPart::Resource(k) => write!(f, "resource({k})"),
            UrlPart::Var(v) => write!(f, "{v}"),
        }
    }
}
