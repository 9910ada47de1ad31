//! Program-analysis driven HTTP prefetching for event-driven apps.
//!
//! The pipeline mirrors how the tool is used on a real app:
//!
//! 1. [`app_ir`] parses the declarative app model and builds the extended call graph.
//! 2. [`string_analysis`] computes the URL Map: concrete values for static URL parts and
//!    the conservative set of Definition Spots for dynamic parts.
//! 3. [`callback_analysis`] profiles the fetch signature and derives the Trigger Map.
//! 4. [`instrument`] rewrites the app with `send_definition`, `trigger_prefetch` and
//!    `fetch_from_proxy` statements, optionally guided by developer hints.
//! 5. [`runtime`] executes original or instrumented apps over a user trace on a virtual
//!    clock, with a local proxy that prefetches into a wait-flagged cache.
//! 6. [`metrics`] turns run logs into precision/recall, hit rate and latency reduction,
//!    and [`mbm`] provides the 25-case microbenchmark.

pub mod app_ir;
pub mod callback_analysis;
pub mod instrument;
pub mod mbm;
pub mod metrics;
pub mod runtime;
pub mod string_analysis;

#[cfg(test)]
pub(crate) mod fixtures;
