//! Deterministic pseudo-random embeddings derived from token content.
//!
//! `hash_embed` maps (seed, dimension, token) to a unit-norm vector by
//! seeding a stream cipher RNG from a digest of the inputs. Equal tokens
//! always get equal vectors and distinct tokens get effectively orthogonal
//! ones (expected cosine ~ 0 for large dimensions), which makes lexical
//! overlap between texts measurable by the same scoring path used for
//! learned embeddings, with zero external dependencies.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::dataset::normalize_label;
use crate::embedding::{
    EmbeddingError, EmbeddingMode, EmbeddingProvider, EmbeddingProviderSpec, PooledEmbedding,
    TokenEmbeddings,
};
use crate::seed::Seed;

/// Unit-norm pseudo-random vector for one token.
///
/// Bit-reproducible across platforms: the RNG is seeded from
/// SHA-256(seed LE bytes, dim LE bytes, token UTF-8) and samples standard
/// normals, then the vector is scaled to unit length.
pub fn hash_embed(token: &str, seed: Seed, dim: usize) -> Vec<f64> {
    assert!(dim > 0, "embedding dimension must be positive");
    let mut hasher = Sha256::new();
    hasher.update(seed.0.to_le_bytes());
    hasher.update((dim as u64).to_le_bytes());
    hasher.update(token.as_bytes());
    let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());
    // A zero norm needs every sample to be 0.0; resampling keeps the
    // function total without biasing any reachable output.
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Embedding provider backed by [`hash_embed`].
///
/// Texts are normalized (case, whitespace, trailing punctuation) and split
/// on whitespace; each token embeds independently, so token order does not
/// affect which vectors appear, only their row order. Serves both modes:
/// pooled output is the mean of the token rows.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    seed: Seed,
    dim: usize,
    mode: EmbeddingMode,
    id: String,
}

impl HashEmbedder {
    pub fn new(seed: Seed, dim: usize, mode: EmbeddingMode) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        let id = format!("hash:seed={}:d={}", seed.0, dim);
        HashEmbedder {
            seed,
            dim,
            mode,
            id,
        }
    }

    pub fn token_mode(seed: Seed, dim: usize) -> Self {
        Self::new(seed, dim, EmbeddingMode::Token)
    }

    pub fn pooled_mode(seed: Seed, dim: usize) -> Self {
        Self::new(seed, dim, EmbeddingMode::Pooled)
    }

    pub fn spec(&self) -> EmbeddingProviderSpec {
        let mut params = std::collections::BTreeMap::new();
        params.insert("seed".to_string(), self.seed.0.to_string());
        EmbeddingProviderSpec {
            provider_id: self.id.clone(),
            mode: self.mode,
            dimension: self.dim,
            params,
        }
    }

    fn tokenize(text: &str) -> Vec<String> {
        normalize_label(text)
            .split_whitespace()
            .map(str::to_string)
            .collect()
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn mode(&self) -> EmbeddingMode {
        self.mode
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings, EmbeddingError> {
        let tokens = Self::tokenize(text);
        if tokens.is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        let mut data = Vec::with_capacity(tokens.len() * self.dim);
        for token in &tokens {
            data.extend(hash_embed(token, self.seed, self.dim));
        }
        TokenEmbeddings::new(tokens, self.dim, data)
    }

    fn embed_pooled(&self, text: &str) -> Result<PooledEmbedding, EmbeddingError> {
        self.embed_tokens(text)?.mean_pooled()
    }
}
