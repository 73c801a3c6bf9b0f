//! Completion providers.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionParams {
    pub temperature: f64,
    pub max_output_chars: usize,
    pub timeout_ms: u64,
    pub max_retries: u32,
}

impl Default for CompletionParams {
    fn default() -> Self {
        Self {
            temperature: 0.7,
            max_output_chars: 4_000,
            timeout_ms: 30_000,
            max_retries: 2,
        }
    }
}

impl CompletionParams {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(ProviderError::InvalidParams("temperature must be >= 0".into()));
        }
        if self.timeout_ms == 0 {
            return Err(ProviderError::InvalidParams("timeout must be > 0".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum ProviderError {
    #[error("provider timed out")]
    Timeout,
    /// Connection-level failure or a server-side error worth retrying.
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider refused the request: {0}")]
    Refused(String),
    #[error("scripted provider has no responses left")]
    Exhausted,
    #[error("invalid completion parameters: {0}")]
    InvalidParams(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::Timeout | ProviderError::Transport(_))
    }
}

/// Text in, text out. Implementations must be usable from several sessions
/// at once.
pub trait CompletionProvider: Send + Sync {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ProviderError>;
}

/// One step of a scripted provider's queue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedReply {
    Text(String),
    Fail(ProviderError),
}

/// Returns queued replies in FIFO order and fails with
/// [`ProviderError::Exhausted`] once the queue is empty.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    queue: Mutex<VecDeque<ScriptedReply>>,
    calls: AtomicUsize,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedProvider {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::from_replies(replies.into_iter().map(|r| ScriptedReply::Text(r.into())))
    }

    pub fn from_replies(replies: impl IntoIterator<Item = ScriptedReply>) -> Self {
        Self {
            queue: Mutex::new(replies.into_iter().collect()),
            ..Self::default()
        }
    }

    pub fn push(&self, reply: ScriptedReply) {
        self.queue.lock().unwrap().push_back(reply);
    }

    pub fn push_text(&self, text: impl Into<String>) {
        self.push(ScriptedReply::Text(text.into()));
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }

    /// Number of `complete` calls, including ones that failed.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }
}

impl CompletionProvider for ScriptedProvider {
    fn complete(&self, prompt: &str, _params: &CompletionParams) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.prompts.lock().unwrap().push(prompt.to_string());
        match self.queue.lock().unwrap().pop_front() {
            Some(ScriptedReply::Text(text)) => Ok(text),
            Some(ScriptedReply::Fail(err)) => Err(err),
            None => Err(ProviderError::Exhausted),
        }
    }
}

impl<P: CompletionProvider + ?Sized> CompletionProvider for std::sync::Arc<P> {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ProviderError> {
        (**self).complete(prompt, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_is_fifo_then_exhausted() {
        let p = ScriptedProvider::new(["a", "b"]);
        let params = CompletionParams::default();
        assert_eq!(p.complete("x", &params).unwrap(), "a");
        assert_eq!(p.complete("y", &params).unwrap(), "b");
        assert_eq!(p.complete("z", &params), Err(ProviderError::Exhausted));
        assert_eq!(p.calls(), 3);
        assert_eq!(p.prompts(), ["x", "y", "z"]);
    }

    #[test]
    fn params_validation() {
        let mut params = CompletionParams::default();
        assert!(params.validate().is_ok());
        params.timeout_ms = 0;
        assert!(params.validate().is_err());
        params = CompletionParams { temperature: -0.1, ..CompletionParams::default() };
        assert!(params.validate().is_err());
    }
}
