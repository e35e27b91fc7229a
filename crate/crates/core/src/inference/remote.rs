//! HTTP chat model speaking the common `/v1/chat/completions` shape:
//! POST {"model", "messages", "temperature": 0, "max_tokens"} returning
//! {"choices": [{"message": {"content"}}]}.
//!
//! Temperature is pinned to 0 for every request. Credentials come from an
//! environment variable named in the config and are never logged.

use std::time::Duration;

use serde::Deserialize;

use crate::inference::{ChatModel, InferenceError, PromptRequest, TEMPERATURE};
use crate::net::{post_json, with_retry, RetryPolicy, Semaphore};

/// Transport knobs shared by remote chat configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct RemoteTransport {
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
}

impl Default for RemoteTransport {
    fn default() -> Self {
        RemoteTransport {
            timeout: Duration::from_secs(60),
            retry: RetryPolicy::default(),
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RemoteChatConfig {
    /// Full URL of the chat completions route.
    pub endpoint: String,
    pub model: String,
    pub api_key_env: Option<String>,
    /// Upper bound on the completion length; answers are short labels.
    pub max_output_tokens: u32,
    pub transport: RemoteTransport,
}

impl RemoteChatConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        RemoteChatConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: None,
            max_output_tokens: 32,
            transport: RemoteTransport::default(),
        }
    }
}

pub struct RemoteChatModel {
    config: RemoteChatConfig,
    id: String,
    client: reqwest::blocking::Client,
    limiter: Semaphore,
    api_key: Option<String>,
}

impl RemoteChatModel {
    pub fn new(config: RemoteChatConfig) -> Result<Self, InferenceError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                InferenceError::MissingCredentials {
                    env_var: var.clone(),
                }
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(config.transport.timeout)
            .build()
            .map_err(|e| InferenceError::ProviderProtocol(format!("building HTTP client: {e}")))?;
        let id = format!("remote:{}@{}", config.model, config.endpoint);
        let limiter = Semaphore::new(config.transport.max_in_flight.max(1));
        Ok(RemoteChatModel {
            config,
            id,
            client,
            limiter,
            api_key,
        })
    }
}

impl ChatModel for RemoteChatModel {
    fn id(&self) -> &str {
        &self.id
    }

    fn predict(&self, request: &PromptRequest) -> Result<String, InferenceError> {
        let _permit = self.limiter.acquire();
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": request.text}],
            "temperature": TEMPERATURE,
            "max_tokens": self.config.max_output_tokens,
        });
        let value = with_retry(&self.config.transport.retry, || {
            post_json(&self.client, &self.config.endpoint, self.api_key.as_deref(), &body)
        })
        .map_err(|e| {
            if e.last.retryable {
                InferenceError::ProviderUnavailable {
                    attempts: e.attempts,
                    reason: e.last.message,
                }
            } else {
                InferenceError::ProviderProtocol(e.last.message)
            }
        })?;
        parse_chat_response(value)
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

fn parse_chat_response(value: serde_json::Value) -> Result<String, InferenceError> {
    let response: ChatResponse = serde_json::from_value(value)
        .map_err(|e| InferenceError::ProviderProtocol(format!("unexpected response shape: {e}")))?;
    response
        .choices
        .into_iter()
        .next()
        .map(|choice| choice.message.content)
        .ok_or_else(|| InferenceError::ProviderProtocol("response carried no choices".into()))
}
