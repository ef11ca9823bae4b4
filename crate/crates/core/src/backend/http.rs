//! OpenAI-compatible chat-completions provider. The API key is read from
//! an environment variable, never from flags or config files.

use super::{Message, Provider, ProviderError, Role};
use serde::Deserialize;
use serde_json::json;
use std::time::Duration;

pub struct HttpProvider {
    base_url: String,
    model_id: String,
    temperature: f64,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
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
    content: String,
}

impl HttpProvider {
    /// `api_key_env` names the environment variable holding the key.
    pub fn new(base_url: &str, model_id: &str, temperature: f64, api_key_env: &str) -> Self {
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            model_id: model_id.to_string(),
            temperature,
            api_key: std::env::var(api_key_env).ok(),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("http client builds"),
        }
    }
}

impl Provider for HttpProvider {
    fn name(&self) -> &'static str {
        "http"
    }

    fn complete(&self, history: &[Message]) -> Result<String, ProviderError> {
        let messages: Vec<_> = history
            .iter()
            .map(|m| {
                json!({
                    "role": match m.role { Role::User => "user", Role::Assistant => "assistant" },
                    "content": m.content,
                })
            })
            .collect();
        let body = json!({
            "model": self.model_id,
            "temperature": self.temperature,
            "messages": messages,
        });

        let mut req = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }

        let resp = req
            .send()
            .map_err(|e| ProviderError::Retryable(format!("network error: {e}")))?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(ProviderError::Retryable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(ProviderError::Fatal(format!("HTTP {status}")));
        }
        let parsed: ChatResponse = resp
            .json()
            .map_err(|e| ProviderError::Fatal(format!("bad response body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| ProviderError::Fatal("response had no choices".into()))
    }
}
