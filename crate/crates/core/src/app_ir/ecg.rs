use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::ast::{App, Stmt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// An explicit `call`.
    Direct,
    /// Invocation performed by the framework on the app's behalf (`asynccall`).
    Framework,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EcgEdge {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
}

/// Call graph over callbacks and helper methods, extended with framework edges.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Ecg {
    pub nodes: Vec<String>,
    pub edges: Vec<EcgEdge>,
}

impl Ecg {
    pub fn callees<'a>(&'a self, from: &'a str) -> impl Iterator<Item = &'a EcgEdge> + 'a {
        self.edges.iter().filter(move |e| e.from == from)
    }

    /// Every node from which `target` is reachable, including `target` itself.
    pub fn reaching(&self, target: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([target.to_string()]);
        while let Some(n) = queue.pop_front() {
            if !seen.insert(n.clone()) {
                continue;
            }
            for e in self.edges.iter().filter(|e| e.to == n) {
                if !seen.contains(&e.from) {
                    queue.push_back(e.from.clone());
                }
            }
        }
        seen
    }
}

/// Builds the extended call graph. Edges keep first-occurrence program order and are
/// deduplicated per `(from, to, kind)`.
pub fn build_ecg(app: &App) -> Ecg {
    let nodes = app.bodies().map(|b| b.name.clone()).collect();
    let mut seen = BTreeSet::new();
    let mut edges = Vec::new();
    for body in app.bodies() {
        for stmt in &body.stmts {
            let (to, kind) = match stmt {
                Stmt::Call(m) => (m, EdgeKind::Direct),
                Stmt::AsyncCall(m) => (m, EdgeKind::Framework),
                _ => continue,
            };
            let edge = EcgEdge {
                from: body.name.clone(),
                to: to.clone(),
                kind,
            };
            if seen.insert(edge.clone()) {
                edges.push(edge);
            }
        }
    }
    Ecg { nodes, edges }
}
