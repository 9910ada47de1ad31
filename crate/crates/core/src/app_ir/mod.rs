//! The app model analysed and rewritten by the rest of the crate: a declarative stand-in
//! for an event-driven mobile app, its `.papp` text form and the extended call graph.

mod ast;
mod ecg;
mod parse;
mod print;
mod validate;

pub use ast::{
    App, Body, Callback, Ccfg, HelperMethod, NetMethodDecl, StaticSource, Stmt, UrlId, UrlPart,
};
pub use ecg::{build_ecg, Ecg, EcgEdge, EdgeKind};
pub use parse::parse_app;
pub use validate::{validate, Diagnostic, ParseError};
