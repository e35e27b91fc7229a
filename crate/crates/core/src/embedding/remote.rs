//! HTTP embedding provider speaking the common `/v1/embeddings` shape:
//! POST {"model", "input": [texts]} returning {"data": [{"index",
//! "embedding"}]}.
//!
//! Pooled mode embeds the text as one input; token mode splits the text on
//! whitespace and embeds each token as its own input, since the wire format
//! only carries one vector per input string. Credentials come from an
//! environment variable named in the config and are never logged.

use std::time::Duration;

use serde::Deserialize;

use crate::embedding::{
    EmbeddingError, EmbeddingMode, EmbeddingProvider, EmbeddingProviderSpec, PooledEmbedding,
    TokenEmbeddings,
};
use crate::net::{post_json, with_retry, RetryPolicy, Semaphore};

#[derive(Debug, Clone)]
pub struct RemoteEmbeddingConfig {
    /// Full URL of the embeddings route, e.g. `https://host/v1/embeddings`.
    pub endpoint: String,
    pub model: String,
    pub mode: EmbeddingMode,
    pub dimension: usize,
    /// Name of the environment variable holding the bearer token, if the
    /// endpoint needs auth.
    pub api_key_env: Option<String>,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
}

impl RemoteEmbeddingConfig {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        mode: EmbeddingMode,
        dimension: usize,
    ) -> Self {
        RemoteEmbeddingConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            mode,
            dimension,
            api_key_env: None,
            timeout: Duration::from_secs(30),
            retry: RetryPolicy::default(),
            max_in_flight: 4,
        }
    }
}

pub struct RemoteEmbedder {
    config: RemoteEmbeddingConfig,
    id: String,
    client: reqwest::blocking::Client,
    limiter: Semaphore,
    api_key: Option<String>,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbeddingConfig) -> Result<Self, EmbeddingError> {
        if config.dimension == 0 {
            return Err(EmbeddingError::EmptyEmbedding);
        }
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                EmbeddingError::MissingCredentials {
                    env_var: var.clone(),
                }
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| EmbeddingError::ProviderProtocol(format!("building HTTP client: {e}")))?;
        let id = format!("remote:{}@{}", config.model, config.endpoint);
        let limiter = Semaphore::new(config.max_in_flight.max(1));
        Ok(RemoteEmbedder {
            config,
            id,
            client,
            limiter,
            api_key,
        })
    }

    pub fn spec(&self) -> EmbeddingProviderSpec {
        let mut params = std::collections::BTreeMap::new();
        params.insert("endpoint".to_string(), self.config.endpoint.clone());
        params.insert("model".to_string(), self.config.model.clone());
        EmbeddingProviderSpec {
            provider_id: self.id.clone(),
            mode: self.config.mode,
            dimension: self.config.dimension,
            params,
        }
    }

    /// One request, one returned vector per input, ordered by index.
    fn request_vectors(&self, inputs: &[&str]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        let _permit = self.limiter.acquire();
        let body = serde_json::json!({
            "model": self.config.model,
            "input": inputs,
        });
        let value = with_retry(&self.config.retry, || {
            post_json(&self.client, &self.config.endpoint, self.api_key.as_deref(), &body)
        })
        .map_err(|e| {
            if e.last.retryable {
                EmbeddingError::ProviderUnavailable {
                    attempts: e.attempts,
                    reason: e.last.message,
                }
            } else {
                EmbeddingError::ProviderProtocol(e.last.message)
            }
        })?;
        parse_embedding_response(value, inputs.len(), self.config.dimension)
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn mode(&self) -> EmbeddingMode {
        self.config.mode
    }

    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings, EmbeddingError> {
        if self.config.mode != EmbeddingMode::Token {
            return Err(EmbeddingError::ModeUnsupported {
                provider: self.id.clone(),
                requested: EmbeddingMode::Token,
            });
        }
        let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        if tokens.is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        let inputs: Vec<&str> = tokens.iter().map(String::as_str).collect();
        let vectors = self.request_vectors(&inputs)?;
        let mut data = Vec::with_capacity(tokens.len() * self.config.dimension);
        for v in vectors {
            data.extend(v);
        }
        TokenEmbeddings::new(tokens, self.config.dimension, data)
    }

    fn embed_pooled(&self, text: &str) -> Result<PooledEmbedding, EmbeddingError> {
        if self.config.mode != EmbeddingMode::Pooled {
            return Err(EmbeddingError::ModeUnsupported {
                provider: self.id.clone(),
                requested: EmbeddingMode::Pooled,
            });
        }
        if text.trim().is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        let vectors = self.request_vectors(&[text])?;
        PooledEmbedding::new(vectors.into_iter().next().expect("one vector per input"))
    }
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingRow>,
}

#[derive(Deserialize)]
struct EmbeddingRow {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f64>,
}

fn parse_embedding_response(
    value: serde_json::Value,
    expected: usize,
    dimension: usize,
) -> Result<Vec<Vec<f64>>, EmbeddingError> {
    let response: EmbeddingsResponse = serde_json::from_value(value)
        .map_err(|e| EmbeddingError::ProviderProtocol(format!("unexpected response shape: {e}")))?;
    if response.data.len() != expected {
        return Err(EmbeddingError::ProviderProtocol(format!(
            "expected {expected} embeddings, got {}",
            response.data.len()
        )));
    }
    let mut vectors: Vec<Option<Vec<f64>>> = vec![None; expected];
    for (position, row) in response.data.into_iter().enumerate() {
        let index = row.index.unwrap_or(position);
        if row.embedding.len() != dimension {
            return Err(EmbeddingError::ProviderProtocol(format!(
                "embedding {index} has dimension {}, expected {dimension}",
                row.embedding.len()
            )));
        }
        if !row.embedding.iter().all(|v| v.is_finite()) {
            return Err(EmbeddingError::ProviderProtocol(format!(
                "embedding {index} contains a non-finite value"
            )));
        }
        let slot = vectors
            .get_mut(index)
            .ok_or_else(|| EmbeddingError::ProviderProtocol(format!("index {index} out of range")))?;
        if slot.replace(row.embedding).is_some() {
            return Err(EmbeddingError::ProviderProtocol(format!(
                "duplicate embedding index {index}"
            )));
        }
    }
    Ok(vectors.into_iter().map(|v| v.expect("all slots filled")).collect())
}
