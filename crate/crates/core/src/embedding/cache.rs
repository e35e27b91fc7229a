//! Content-addressed on-disk cache for embeddings.
//!
//! Entries are keyed by digest of (provider id, mode, text digest), so a
//! cache directory can be shared between providers and runs without false
//! hits. One entry is two files: a binary payload of (rows, dim) as 32-bit
//! little-endian integers followed by the row-major doubles, and a JSON
//! sidecar listing the token strings (empty for pooled vectors). Each file
//! is written via temp file and atomic rename; concurrent writers of the
//! same key race benignly because providers are deterministic and write
//! identical bytes. Unreadable or malformed entries are evicted and
//! recomputed rather than surfaced as errors.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};

use crate::embedding::{
    EmbeddingError, EmbeddingMode, EmbeddingProvider, PooledEmbedding, TokenEmbeddings,
};

/// Directory-backed embedding store with hit/miss counters; share one
/// instance per run.
pub struct EmbeddingCache {
    root: PathBuf,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl EmbeddingCache {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self, EmbeddingError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(EmbeddingCache {
            root,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    /// Cache key for one (provider, mode, text) combination.
    pub fn key(provider_id: &str, mode: EmbeddingMode, text: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(provider_id.as_bytes());
        hasher.update([0u8]);
        hasher.update(mode.as_str().as_bytes());
        hasher.update([0u8]);
        hasher.update(Sha256::digest(text.as_bytes()));
        hex::encode(hasher.finalize())
    }

    fn payload_path(&self, key: &str) -> PathBuf {
        self.root.join(&key[..2]).join(format!("{key}.bin"))
    }

    fn sidecar_path(&self, key: &str) -> PathBuf {
        self.root.join(&key[..2]).join(format!("{key}.tokens.json"))
    }

    fn evict(&self, key: &str) {
        let _ = fs::remove_file(self.payload_path(key));
        let _ = fs::remove_file(self.sidecar_path(key));
    }

    fn load_raw(&self, key: &str) -> Option<(Vec<String>, usize, Vec<f64>)> {
        let payload = fs::read(self.payload_path(key)).ok()?;
        let sidecar = fs::read(self.sidecar_path(key)).ok()?;
        let (rows, dim, data) = decode_payload(&payload)?;
        let tokens: Vec<String> = serde_json::from_slice(&sidecar).ok()?;
        if !tokens.is_empty() && tokens.len() != rows {
            return None;
        }
        Some((tokens, dim, data))
    }

    fn store_raw(
        &self,
        key: &str,
        tokens: &[String],
        rows: usize,
        dim: usize,
        data: &[f64],
    ) -> Result<(), EmbeddingError> {
        let payload_path = self.payload_path(key);
        let dir = payload_path.parent().expect("cache entry path has a parent");
        fs::create_dir_all(dir)?;
        write_atomic(&self.sidecar_path(key), &serde_json::to_vec(tokens).expect("token list serializes"))?;
        write_atomic(&payload_path, &encode_payload(rows, dim, data))?;
        Ok(())
    }

    /// Serve token embeddings from disk, calling `compute` and persisting
    /// the result on miss or on a corrupt entry.
    pub fn get_or_compute_tokens(
        &self,
        provider_id: &str,
        text: &str,
        compute: impl FnOnce() -> Result<TokenEmbeddings, EmbeddingError>,
    ) -> Result<TokenEmbeddings, EmbeddingError> {
        let key = Self::key(provider_id, EmbeddingMode::Token, text);
        if let Some((tokens, dim, data)) = self.load_raw(&key) {
            if let Ok(cached) = TokenEmbeddings::new(tokens, dim, data) {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return Ok(cached);
            }
        }
        self.evict(&key);
        self.misses.fetch_add(1, Ordering::Relaxed);
        let computed = compute()?;
        self.store_raw(
            &key,
            computed.tokens(),
            computed.rows(),
            computed.dim(),
            computed.data(),
        )?;
        Ok(computed)
    }

    /// Pooled-mode counterpart of [`Self::get_or_compute_tokens`].
    pub fn get_or_compute_pooled(
        &self,
        provider_id: &str,
        text: &str,
        compute: impl FnOnce() -> Result<PooledEmbedding, EmbeddingError>,
    ) -> Result<PooledEmbedding, EmbeddingError> {
        let key = Self::key(provider_id, EmbeddingMode::Pooled, text);
        if let Some((tokens, _dim, data)) = self.load_raw(&key) {
            if tokens.is_empty() {
                if let Ok(cached) = PooledEmbedding::new(data) {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                    return Ok(cached);
                }
            }
        }
        self.evict(&key);
        self.misses.fetch_add(1, Ordering::Relaxed);
        let computed = compute()?;
        self.store_raw(&key, &[], 1, computed.dim(), computed.vector())?;
        Ok(computed)
    }
}

/// Provider wrapper that reads through an [`EmbeddingCache`].
///
/// Keeps the inner provider's id: cached and direct computation are the
/// same function, so they must share cache keys and provenance identity.
pub struct CachedProvider<'a, P> {
    inner: P,
    cache: &'a EmbeddingCache,
}

impl<'a, P: EmbeddingProvider> CachedProvider<'a, P> {
    pub fn new(inner: P, cache: &'a EmbeddingCache) -> Self {
        CachedProvider { inner, cache }
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedProvider<'_, P> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn mode(&self) -> EmbeddingMode {
        self.inner.mode()
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings, EmbeddingError> {
        self.cache
            .get_or_compute_tokens(self.inner.id(), text, || self.inner.embed_tokens(text))
    }

    fn embed_pooled(&self, text: &str) -> Result<PooledEmbedding, EmbeddingError> {
        self.cache
            .get_or_compute_pooled(self.inner.id(), text, || self.inner.embed_pooled(text))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), EmbeddingError> {
    let dir = path.parent().expect("cache entry path has a parent");
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| EmbeddingError::CacheIo(e.error))?;
    Ok(())
}

fn encode_payload(rows: usize, dim: usize, data: &[f64]) -> Vec<u8> {
    debug_assert_eq!(rows * dim, data.len());
    let mut out = Vec::with_capacity(8 + data.len() * 8);
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode_payload(bytes: &[u8]) -> Option<(usize, usize, Vec<f64>)> {
    if bytes.len() < 8 {
        return None;
    }
    let rows = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let values = rows.checked_mul(dim)?;
    if bytes.len() != 8 + values.checked_mul(8)? {
        return None;
    }
    let data = bytes[8..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Some((rows, dim, data))
}
