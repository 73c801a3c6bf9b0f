//! Errors and the single JSON line printed for each.

use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("script step {step}: {reason}")]
    ScriptInvalid { step: usize, reason: String },
    #[error("driver triggered with no scripted responses left (journal seq {seq})")]
    ScriptExhausted { seq: u64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Session(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::ScriptInvalid { .. } => "script_invalid",
            CliError::ScriptExhausted { .. } => "script_exhausted",
            CliError::Io { .. } => "io",
            CliError::Session(_) => "session",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }

    /// One-line JSON rendering for stderr.
    pub fn to_line(&self) -> String {
        let mut line = json!({ "error": self.kind(), "message": self.to_string() });
        match self {
            CliError::ScriptInvalid { step, .. } => line["step"] = json!(step),
            CliError::ScriptExhausted { seq } => line["seq"] = json!(seq),
            _ => {}
        }
        line.to_string()
    }
}

/// Non-fatal problem in a batch; printed to stderr as a JSON line.
pub fn warn(kind: &str, file: &std::path::Path, message: &str) {
    eprintln!(
        "{}",
        json!({ "warning": kind, "file": file.display().to_string(), "message": message })
    );
}
