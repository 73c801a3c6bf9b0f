//! Hosted-model client speaking the OpenAI-style chat completions protocol.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::provider::{CompletionParams, CompletionProvider, ProviderError};

pub const ENV_ENDPOINT: &str = "REMINI_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "REMINI_LLM_API_KEY";
pub const ENV_MODEL: &str = "REMINI_LLM_MODEL";

const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1";
const DEFAULT_MODEL: &str = "gpt-4o-2024-05-13";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub api_key: String,
    pub model: String,
}

impl RemoteConfig {
    /// Reads the endpoint, credential and model from the environment. The
    /// credential is required; the other two have defaults.
    pub fn from_env() -> Result<Self, ProviderError> {
        let api_key = std::env::var(ENV_API_KEY)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| ProviderError::InvalidParams(format!("{ENV_API_KEY} is not set")))?;
        Ok(Self {
            endpoint: std::env::var(ENV_ENDPOINT).unwrap_or_else(|_| DEFAULT_ENDPOINT.to_string()),
            api_key,
            model: std::env::var(ENV_MODEL).unwrap_or_else(|_| DEFAULT_MODEL.to_string()),
        })
    }
}

/// Makes exactly one HTTP request per `complete` call. Retrying is left to
/// the pipeline so the retry budget is counted in one place.
pub struct RemoteProvider {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl RemoteProvider {
    pub fn new(config: RemoteConfig) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(Self { config, client })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'))
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

impl CompletionProvider for RemoteProvider {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ProviderError> {
        params.validate()?;
        let body = json!({
            "model": self.config.model,
            "temperature": params.temperature,
            "messages": [{ "role": "system", "content": prompt }],
        });
        let response = self
            .client
            .post(self.url())
            .bearer_auth(&self.config.api_key)
            .timeout(params.timeout())
            .json(&body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    ProviderError::Timeout
                } else {
                    ProviderError::Transport(e.to_string())
                }
            })?;

        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(ProviderError::Transport(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let detail = response.text().unwrap_or_default();
            return Err(ProviderError::Refused(format!("HTTP {status}: {detail}")));
        }
        let parsed: ChatResponse = response.json().map_err(|e| {
            if e.is_timeout() {
                ProviderError::Timeout
            } else {
                ProviderError::Refused(format!("unreadable response: {e}"))
            }
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::Refused("response has no content".into()))
    }
}
