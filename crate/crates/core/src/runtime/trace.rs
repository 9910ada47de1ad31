use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One user event: wait `think_ms`, then fire `event`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub event: String,
    #[serde(default)]
    pub think_ms: u64,
    /// Values for `input(<tag>)` definitions executed while handling this event.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
}

impl Step {
    pub fn new(event: impl Into<String>, think_ms: u64) -> Self {
        Step {
            event: event.into(),
            think_ms,
            inputs: BTreeMap::new(),
        }
    }

    pub fn input(mut self, tag: impl Into<String>, value: impl Into<String>) -> Self {
        self.inputs.insert(tag.into(), value.into());
        self
    }
}

/// A user session. Serialized as a bare JSON list of steps.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trace {
    pub steps: Vec<Step>,
}

impl Trace {
    pub fn new(steps: Vec<Step>) -> Self {
        Trace { steps }
    }
}
