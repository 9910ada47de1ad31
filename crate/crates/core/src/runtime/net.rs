use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::app_ir::App;

pub const DEFAULT_THRESHOLD: usize = 5;

fn default_threshold() -> usize {
    DEFAULT_THRESHOLD
}

/// Virtual-time cost of each instrumentation call. All zero unless configured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PseudoCosts {
    pub send_definition_ms: u64,
    pub trigger_prefetch_ms: u64,
    pub fetch_from_proxy_ms: u64,
}

/// Simulated origin server and network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetModel {
    /// Overrides every method's declared latency unless `per_method` names it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_latency_ms: Option<u64>,
    #[serde(default)]
    pub per_method: BTreeMap<String, u64>,
    /// Response payload per concrete URL.
    #[serde(default)]
    pub server: BTreeMap<String, String>,
    /// Maximum number of prefetches issued by a single trigger.
    #[serde(default = "default_threshold")]
    pub threshold: usize,
    #[serde(default)]
    pub costs: PseudoCosts,
}

impl Default for NetModel {
    fn default() -> Self {
        NetModel {
            default_latency_ms: None,
            per_method: BTreeMap::new(),
            server: BTreeMap::new(),
            threshold: DEFAULT_THRESHOLD,
            costs: PseudoCosts::default(),
        }
    }
}

impl NetModel {
    pub fn with_default_latency(latency_ms: u64) -> Self {
        NetModel {
            default_latency_ms: Some(latency_ms),
            ..NetModel::default()
        }
    }

    /// Per-call latency of `method`: explicit override, then global default, then the
    /// latency declared by the app.
    pub fn latency(&self, app: &App, method: &str) -> u64 {
        self.per_method
            .get(method)
            .copied()
            .or(self.default_latency_ms)
            .or_else(|| app.netmethod(method).map(|n| n.latency_ms))
            .unwrap_or(0)
    }

    /// Origin response for `url`. Unlisted URLs get a deterministic synthetic body.
    pub fn payload(&self, url: &str) -> String {
        self.server
            .get(url)
            .cloned()
            .unwrap_or_else(|| format!("<response for {url}>"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::app_ir::parse_app;

    #[test]
    fn latency_precedence() {
        let app = parse_app("app x\nnetmethod a latency=10\nnetmethod b latency=20\n").unwrap();
        let mut net = NetModel::default();
        assert_eq!(net.latency(&app, "a"), 10);
        net.default_latency_ms = Some(99);
        assert_eq!(net.latency(&app, "a"), 99);
        net.per_method.insert("b".into(), 5);
        assert_eq!(net.latency(&app, "b"), 5);
        assert_eq!(net.latency(&app, "a"), 99);
    }

    #[test]
    fn json_defaults() {
        let net: NetModel = serde_json::from_str("{}").unwrap();
        assert_eq!(net.threshold, 5);
        assert_eq!(net.costs, PseudoCosts::default());
        assert_eq!(net.payload("u"), net.payload("u"));
    }
}
