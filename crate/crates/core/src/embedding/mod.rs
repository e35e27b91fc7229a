//! Embedding providers: token-level and pooled text representations.
//!
//! Similarity scoring is defined over an abstract provider, not a specific
//! model: anything that can turn text into one vector per token (or one
//! pooled vector) plugs in here. The crate ships a deterministic hash-based
//! provider for reproducible experiments and tests, a remote HTTP provider
//! speaking the common `/v1/embeddings` shape, and a transparent on-disk
//! cache that wraps any provider.
//!
//! Providers must be deterministic: for a fixed `provider_id`, equal texts
//! produce equal embeddings across processes and thread interleavings. The
//! cache relies on this (concurrent writers of the same key are benign).

pub mod cache;
pub mod hash;
pub mod remote;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Whether a provider serves one vector per token or one per text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    Token,
    Pooled,
}

impl EmbeddingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingMode::Token => "token",
            EmbeddingMode::Pooled => "pooled",
        }
    }
}

/// Per-token embedding matrix for one text.
///
/// One row per token, all rows the same dimension, no all-zero rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenEmbeddings {
    tokens: Vec<String>,
    dim: usize,
    /// Row-major, `tokens.len() * dim` values.
    data: Vec<f64>,
}

impl TokenEmbeddings {
    pub fn new(tokens: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self, EmbeddingError> {
        if tokens.is_empty() || dim == 0 {
            return Err(EmbeddingError::EmptyEmbedding);
        }
        if data.len() != tokens.len() * dim {
            return Err(EmbeddingError::ShapeMismatch {
                rows: tokens.len(),
                dim,
                values: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(EmbeddingError::NonFiniteValue);
        }
        for (row, chunk) in data.chunks(dim).enumerate() {
            if chunk.iter().all(|&v| v == 0.0) {
                return Err(EmbeddingError::ZeroRow { row });
            }
        }
        Ok(TokenEmbeddings { tokens, dim, data })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn rows(&self) -> usize {
        self.tokens.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Arithmetic mean of the token rows.
    pub fn mean_pooled(&self) -> Result<PooledEmbedding, EmbeddingError> {
        let mut mean = vec![0.0; self.dim];
        for row in self.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.rows() as f64;
        for m in &mut mean {
            *m /= n;
        }
        PooledEmbedding::new(mean)
    }
}

/// A single pooled (sentence-level) embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledEmbedding {
    vector: Vec<f64>,
}

impl PooledEmbedding {
    pub fn new(vector: Vec<f64>) -> Result<Self, EmbeddingError> {
        if vector.is_empty() {
            return Err(EmbeddingError::EmptyEmbedding);
        }
        if !vector.iter().all(|v| v.is_finite()) {
            return Err(EmbeddingError::NonFiniteValue);
        }
        if vector.iter().all(|&v| v == 0.0) {
            return Err(EmbeddingError::ZeroRow { row: 0 });
        }
        Ok(PooledEmbedding { vector })
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Declarative description of a provider, used for construction and for
/// recording provenance in run metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingProviderSpec {
    /// Stable identity; two providers with the same id must compute the same
    /// function. Used as a cache-key component.
    pub provider_id: String,
    pub mode: EmbeddingMode,
    pub dimension: usize,
    /// Opaque provider-specific configuration.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
}

/// A source of embeddings.
///
/// `embed_tokens` is the primary surface for token-mode providers and
/// `embed_pooled` for pooled-mode ones; calling the other method returns
/// [`EmbeddingError::ModeUnsupported`] unless the provider supports both.
pub trait EmbeddingProvider: Send + Sync {
    /// Stable identity for cache keys and provenance.
    fn id(&self) -> &str;

    fn mode(&self) -> EmbeddingMode;

    fn dimension(&self) -> usize;

    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings, EmbeddingError>;

    fn embed_pooled(&self, text: &str) -> Result<PooledEmbedding, EmbeddingError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn mode(&self) -> EmbeddingMode {
        (**self).mode()
    }

    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings, EmbeddingError> {
        (**self).embed_tokens(text)
    }

    fn embed_pooled(&self, text: &str) -> Result<PooledEmbedding, EmbeddingError> {
        (**self).embed_pooled(text)
    }
}

/// Pooled-mode adapter over a token-mode provider: mean of the token rows.
pub struct MeanPool<P> {
    inner: P,
    id: String,
}

impl<P: EmbeddingProvider> MeanPool<P> {
    pub fn new(inner: P) -> Self {
        let id = format!("meanpool({})", inner.id());
        MeanPool { inner, id }
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for MeanPool<P> {
    fn id(&self) -> &str {
        &self.id
    }

    fn mode(&self) -> EmbeddingMode {
        EmbeddingMode::Pooled
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed_tokens(&self, _text: &str) -> Result<TokenEmbeddings, EmbeddingError> {
        Err(EmbeddingError::ModeUnsupported {
            provider: self.id.clone(),
            requested: EmbeddingMode::Token,
        })
    }

    fn embed_pooled(&self, text: &str) -> Result<PooledEmbedding, EmbeddingError> {
        self.inner.embed_tokens(text)?.mean_pooled()
    }
}

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("text is empty after trimming")]
    EmptyText,
    #[error("embedding has no rows or zero dimension")]
    EmptyEmbedding,
    #[error("embedding shape mismatch: {rows} rows x {dim} dims != {values} values")]
    ShapeMismatch {
        rows: usize,
        dim: usize,
        values: usize,
    },
    #[error("embedding row {row} is all zeros")]
    ZeroRow { row: usize },
    #[error("embedding contains a non-finite value")]
    NonFiniteValue,
    #[error("provider \"{provider}\" does not serve {} embeddings", requested.as_str())]
    ModeUnsupported {
        provider: String,
        requested: EmbeddingMode,
    },
    #[error("credential environment variable {env_var} is not set")]
    MissingCredentials { env_var: String },
    #[error("provider unavailable after {attempts} attempts: {reason}")]
    ProviderUnavailable { attempts: u32, reason: String },
    #[error("provider protocol error: {0}")]
    ProviderProtocol(String),
    #[error("cache entry {key} is corrupt: {reason}")]
    StorageCorrupt { key: String, reason: String },
    #[error("cache i/o error: {0}")]
    CacheIo(#[from] std::io::Error),
}
