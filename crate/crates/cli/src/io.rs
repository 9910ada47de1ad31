use std::fmt;
use std::fs;
use std::path::Path;

use apprefetch::app_ir::{parse_app, App};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// A failed command: message plus the process exit code.
#[derive(Debug)]
pub struct Fail {
    pub code: i32,
    pub message: String,
}

impl Fail {
    /// Bad arguments, unreadable files, malformed JSON.
    pub fn usage(message: impl Into<String>) -> Self {
        Fail {
            code: 1,
            message: message.into(),
        }
    }

    /// Parse, analysis or runtime failure on well-formed input.
    pub fn analysis(message: impl Into<String>) -> Self {
        Fail {
            code: 2,
            message: message.into(),
        }
    }
}

impl fmt::Display for Fail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CmdResult<T> = Result<T, Fail>;

pub fn read_text(path: &Path) -> CmdResult<String> {
    fs::read_to_string(path)
        .map_err(|e| Fail::usage(format!("cannot read {}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CmdResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Fail::usage(format!("{}: malformed JSON: {e}", path.display())))
}

pub fn read_app(path: &Path) -> CmdResult<App> {
    let text = read_text(path)?;
    parse_app(&text).map_err(|e| Fail::analysis(format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline; every artifact is written through this.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> CmdResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| Fail::usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Fail::usage(format!("cannot write {}: {e}", path.display())))
}
