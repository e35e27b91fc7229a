//! Query-option similarity scoring.
//!
//! The primary metric embeds both texts token-wise, takes the cosine of
//! every (option token, query token) pair, and averages over all pairs,
//! yielding one scalar per option. Variants swap the pair function for L1
//! or L2 distance, or compare single pooled vectors. Scores only ever feed
//! rankings, so distance metrics keep their natural orientation (smaller
//! means more similar) instead of being converted into similarities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{normalize_label, McqaDataset, McqaSample, OptionCatalog};
use crate::embedding::{
    EmbeddingError, EmbeddingMode, EmbeddingProvider, PooledEmbedding, TokenEmbeddings,
};

/// Which way a metric's scores point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherIsMoreSimilar,
    LowerIsMoreSimilar,
}

/// Scoring metric. Orientation and required embedding mode are functions of
/// the metric, so invalid combinations are unrepresentable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMetric {
    TokenMeanCosine,
    TokenMeanEuclidean,
    TokenMeanManhattan,
    PooledCosine,
}

impl SimilarityMetric {
    pub const ALL: [SimilarityMetric; 4] = [
        SimilarityMetric::TokenMeanCosine,
        SimilarityMetric::TokenMeanEuclidean,
        SimilarityMetric::TokenMeanManhattan,
        SimilarityMetric::PooledCosine,
    ];

    pub fn orientation(self) -> Orientation {
        match self {
            SimilarityMetric::TokenMeanCosine | SimilarityMetric::PooledCosine => {
                Orientation::HigherIsMoreSimilar
            }
            SimilarityMetric::TokenMeanEuclidean | SimilarityMetric::TokenMeanManhattan => {
                Orientation::LowerIsMoreSimilar
            }
        }
    }

    /// Embedding granularity the metric consumes.
    pub fn mode(self) -> EmbeddingMode {
        match self {
            SimilarityMetric::PooledCosine => EmbeddingMode::Pooled,
            _ => EmbeddingMode::Token,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SimilarityMetric::TokenMeanCosine => "token_mean_cosine",
            SimilarityMetric::TokenMeanEuclidean => "token_mean_euclidean",
            SimilarityMetric::TokenMeanManhattan => "token_mean_manhattan",
            SimilarityMetric::PooledCosine => "pooled_cosine",
        }
    }
}

impl std::str::FromStr for SimilarityMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SimilarityMetric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown similarity metric {s:?}"))
    }
}

/// Per-option scores for one sample under one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionScores {
    sample_id: String,
    metric: SimilarityMetric,
    scores: Vec<f64>,
}

impl OptionScores {
    pub fn new(
        sample_id: impl Into<String>,
        metric: SimilarityMetric,
        scores: Vec<f64>,
    ) -> Result<Self, SimilarityError> {
        if scores.is_empty() || !scores.iter().all(|s| s.is_finite()) {
            return Err(SimilarityError::NonFiniteScore);
        }
        if metric == SimilarityMetric::TokenMeanCosine
            && !scores.iter().all(|&s| (-1.0..=1.0).contains(&s))
        {
            return Err(SimilarityError::CosineOutOfRange);
        }
        Ok(OptionScores {
            sample_id: sample_id.into(),
            metric,
            scores,
        })
    }

    pub fn sample_id(&self) -> &str {
        &self.sample_id
    }

    pub fn metric(&self) -> SimilarityMetric {
        self.metric
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Cosine similarity between two token vectors, clamped into [-1, 1] to
/// absorb rounding at the boundary.
pub fn token_cosine(u: &[f64], v: &[f64]) -> Result<f64, SimilarityError> {
    check_dims(u, v)?;
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(SimilarityError::ZeroVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceNorm {
    Euclidean,
    Manhattan,
}

/// L2 or L1 distance between two token vectors.
pub fn token_pair_distance(u: &[f64], v: &[f64], norm: DistanceNorm) -> Result<f64, SimilarityError> {
    check_dims(u, v)?;
    let d = match norm {
        DistanceNorm::Euclidean => u
            .iter()
            .zip(v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt(),
        DistanceNorm::Manhattan => u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum(),
    };
    Ok(d)
}

/// Mean of `pair_fn` over every (option token, query token) pair.
///
/// Sums pairwise (tree-shaped) so the result stays within 1e-9 of the
/// literal nested loop even at ~10^4 pairs.
pub fn aggregate_mean_similarity(
    option_tokens: &TokenEmbeddings,
    query_tokens: &TokenEmbeddings,
    pair_fn: impl Fn(&[f64], &[f64]) -> Result<f64, SimilarityError>,
) -> Result<f64, SimilarityError> {
    if option_tokens.dim() != query_tokens.dim() {
        return Err(SimilarityError::DimensionMismatch {
            left: option_tokens.dim(),
            right: query_tokens.dim(),
        });
    }
    let mut values = Vec::with_capacity(option_tokens.rows() * query_tokens.rows());
    for o in option_tokens.iter_rows() {
        for q in query_tokens.iter_rows() {
            values.push(pair_fn(o, q)?);
        }
    }
    Ok(pairwise_sum(&values) / values.len() as f64)
}

fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

fn check_dims(u: &[f64], v: &[f64]) -> Result<(), SimilarityError> {
    if u.len() != v.len() {
        return Err(SimilarityError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(())
}

fn pair_fn_for(metric: SimilarityMetric) -> fn(&[f64], &[f64]) -> Result<f64, SimilarityError> {
    match metric {
        SimilarityMetric::TokenMeanCosine => token_cosine,
        SimilarityMetric::TokenMeanEuclidean => {
            |u, v| token_pair_distance(u, v, DistanceNorm::Euclidean)
        }
        SimilarityMetric::TokenMeanManhattan => {
            |u, v| token_pair_distance(u, v, DistanceNorm::Manhattan)
        }
        SimilarityMetric::PooledCosine => unreachable!("pooled metric has no token pair function"),
    }
}

/// Scoring knobs that apply uniformly to queries and option labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreSettings {
    /// Normalize texts (case, whitespace, trailing punctuation) before
    /// embedding. Off by default: texts are embedded as-is.
    pub pre_normalize: bool,
}

impl ScoreSettings {
    fn apply(self, text: &str) -> String {
        if self.pre_normalize {
            normalize_label(text)
        } else {
            text.to_string()
        }
    }
}

/// Option-label embeddings computed once per catalog and reused across
/// samples.
enum CatalogEmbeddings {
    Token(Vec<TokenEmbeddings>),
    Pooled(Vec<PooledEmbedding>),
}

fn embed_catalog(
    catalog: &OptionCatalog,
    provider: &dyn EmbeddingProvider,
    metric: SimilarityMetric,
    settings: ScoreSettings,
) -> Result<CatalogEmbeddings, SimilarityError> {
    match metric.mode() {
        EmbeddingMode::Token => {
            let embedded = catalog
                .labels()
                .iter()
                .map(|label| provider.embed_tokens(&settings.apply(label)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(CatalogEmbeddings::Token(embedded))
        }
        EmbeddingMode::Pooled => {
            let embedded = catalog
                .labels()
                .iter()
                .map(|label| provider.embed_pooled(&settings.apply(label)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(CatalogEmbeddings::Pooled(embedded))
        }
    }
}

fn score_against(
    query_text: &str,
    options: &CatalogEmbeddings,
    provider: &dyn EmbeddingProvider,
    metric: SimilarityMetric,
    settings: ScoreSettings,
) -> Result<Vec<f64>, SimilarityError> {
    let query_text = settings.apply(query_text);
    match options {
        CatalogEmbeddings::Token(options) => {
            let query = provider.embed_tokens(&query_text)?;
            let pair_fn = pair_fn_for(metric);
            options
                .iter()
                .map(|option| aggregate_mean_similarity(option, &query, pair_fn))
                .collect()
        }
        CatalogEmbeddings::Pooled(options) => {
            let query = provider.embed_pooled(&query_text)?;
            options
                .iter()
                .map(|option| token_cosine(option.vector(), query.vector()))
                .collect()
        }
    }
}

fn check_mode(
    provider: &dyn EmbeddingProvider,
    metric: SimilarityMetric,
) -> Result<(), SimilarityError> {
    if provider.mode() != metric.mode() {
        return Err(SimilarityError::ModeMismatch {
            metric,
            provider_mode: provider.mode(),
        });
    }
    Ok(())
}

/// Score every catalog option against one query text.
pub fn score_options(
    query_text: &str,
    catalog: &OptionCatalog,
    provider: &dyn EmbeddingProvider,
    metric: SimilarityMetric,
) -> Result<OptionScores, SimilarityError> {
    check_mode(provider, metric)?;
    let settings = ScoreSettings::default();
    let options = embed_catalog(catalog, provider, metric, settings)?;
    let scores = score_against(query_text, &options, provider, metric, settings)?;
    OptionScores::new("", metric, scores)
}

/// [`score_options`] for a dataset sample, carrying the sample id.
pub fn score_sample(
    sample: &McqaSample,
    catalog: &OptionCatalog,
    provider: &dyn EmbeddingProvider,
    metric: SimilarityMetric,
) -> Result<OptionScores, SimilarityError> {
    check_mode(provider, metric)?;
    let settings = ScoreSettings::default();
    let options = embed_catalog(catalog, provider, metric, settings)?;
    let scores = score_against(&sample.query, &options, provider, metric, settings)?;
    OptionScores::new(sample.id.clone(), metric, scores)
}

/// Score every sample in a dataset, embedding the option labels once and
/// scoring samples in parallel. Output order matches dataset order.
pub fn score_dataset(
    dataset: &McqaDataset,
    provider: &dyn EmbeddingProvider,
    metric: SimilarityMetric,
    settings: ScoreSettings,
) -> Result<Vec<OptionScores>, SimilarityError> {
    check_mode(provider, metric)?;
    let options = embed_catalog(&dataset.catalog, provider, metric, settings)?;
    dataset
        .samples
        .par_iter()
        .map(|sample| {
            let scores = score_against(&sample.query, &options, provider, metric, settings)?;
            OptionScores::new(sample.id.clone(), metric, scores)
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("vector dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine is undefined for a zero vector")]
    ZeroVector,
    #[error("scores must be finite and non-empty")]
    NonFiniteScore,
    #[error("token_mean_cosine score outside [-1, 1]")]
    CosineOutOfRange,
    #[error("metric {} needs a {} provider, got a {} provider", .metric.as_str(), .metric.mode().as_str(), .provider_mode.as_str())]
    ModeMismatch {
        metric: SimilarityMetric,
        provider_mode: EmbeddingMode,
    },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}
