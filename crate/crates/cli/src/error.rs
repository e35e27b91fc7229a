//! One error type per exit-code family. Every failure the CLI can hit maps
//! into exactly one family so scripts can branch on the code alone:
//!
//! | code | family   | examples                                              |
//! |------|----------|-------------------------------------------------------|
//! | 2    | usage    | bad flags, bad overrides, inconsistent config         |
//! | 3    | missing  | config / manifest / profile file not found            |
//! | 4    | data     | malformed TOML/JSON, dataset validation, bad profile  |
//! | 5    | provider | remote endpoint unreachable or talking nonsense       |
//! | 6    | storage  | cache corruption, run-directory write failures        |
//! | 7    | internal | states the CLI should never reach                     |

use std::path::Path;

use mcqa::embedding::EmbeddingError;
use mcqa::eval::EvalError;
use mcqa::inference::InferenceError;
use mcqa::ingest::IngestError;
use mcqa::reorder::ReorderError;
use mcqa::rundir::RunDirError;
use mcqa::similarity::SimilarityError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("data: {0}")]
    Data(String),
    #[error("provider: {0}")]
    Provider(String),
    #[error("storage: {0}")]
    Storage(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::NotFound(_) => 3,
            CliError::Data(_) => 4,
            CliError::Provider(_) => 5,
            CliError::Storage(_) => 6,
            CliError::Internal(_) => 7,
        }
    }

    pub fn from_io(path: &Path, err: std::io::Error) -> CliError {
        if err.kind() == std::io::ErrorKind::NotFound {
            CliError::NotFound(path.display().to_string())
        } else {
            CliError::Data(format!("{}: {err}", path.display()))
        }
    }
}

impl From<IngestError> for CliError {
    fn from(err: IngestError) -> Self {
        match &err {
            IngestError::FileNotFound { path } => CliError::NotFound(path.display().to_string()),
            IngestError::Io { path, source }
                if source.kind() == std::io::ErrorKind::NotFound =>
            {
                CliError::NotFound(path.display().to_string())
            }
            _ => CliError::Data(err.to_string()),
        }
    }
}

impl From<EmbeddingError> for CliError {
    fn from(err: EmbeddingError) -> Self {
        match &err {
            EmbeddingError::ModeUnsupported { .. } | EmbeddingError::MissingCredentials { .. } => {
                CliError::Config(err.to_string())
            }
            EmbeddingError::ProviderUnavailable { .. }
            | EmbeddingError::ProviderProtocol(_)
            | EmbeddingError::ShapeMismatch { .. }
            | EmbeddingError::ZeroRow { .. }
            | EmbeddingError::NonFiniteValue
            | EmbeddingError::EmptyEmbedding => CliError::Provider(err.to_string()),
            EmbeddingError::StorageCorrupt { .. } | EmbeddingError::CacheIo(_) => {
                CliError::Storage(err.to_string())
            }
            EmbeddingError::EmptyText => CliError::Data(err.to_string()),
        }
    }
}

impl From<SimilarityError> for CliError {
    fn from(err: SimilarityError) -> Self {
        match err {
            SimilarityError::ModeMismatch { .. } => CliError::Config(err.to_string()),
            SimilarityError::Embedding(inner) => inner.into(),
            // Remaining variants are bad values in the embedding pathway,
            // which deterministic providers cannot produce.
            _ => CliError::Provider(err.to_string()),
        }
    }
}

impl From<InferenceError> for CliError {
    fn from(err: InferenceError) -> Self {
        match &err {
            InferenceError::MissingScores { .. }
            | InferenceError::MissingCredentials { .. }
            | InferenceError::InvalidModelConfig(_) => CliError::Config(err.to_string()),
            InferenceError::ProviderUnavailable { .. } | InferenceError::ProviderProtocol(_) => {
                CliError::Provider(err.to_string())
            }
            InferenceError::InvalidArrangement { .. } => CliError::Internal(err.to_string()),
        }
    }
}

impl From<ReorderError> for CliError {
    fn from(err: ReorderError) -> Self {
        match &err {
            ReorderError::ProfileIo { path, source }
                if source.kind() == std::io::ErrorKind::NotFound =>
            {
                CliError::NotFound(path.clone())
            }
            ReorderError::ProfileIo { .. }
            | ReorderError::ProfileParse { .. }
            | ReorderError::InvalidProfile
            | ReorderError::EmptyScores => CliError::Data(err.to_string()),
            ReorderError::LengthMismatch { .. }
            | ReorderError::TargetOutOfRange { .. }
            | ReorderError::PositionOutOfRange { .. }
            | ReorderError::MissingScores => CliError::Config(err.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(err: EvalError) -> Self {
        match err {
            EvalError::EmptyDataset => CliError::Data(err.to_string()),
            EvalError::InvalidPositions
            | EvalError::InvalidStride
            | EvalError::InvalidK { .. }
            | EvalError::NeedTwoDatasets { .. } => CliError::Config(err.to_string()),
            EvalError::LengthMismatch { .. } | EvalError::ScoresMisaligned { .. } => {
                CliError::Data(err.to_string())
            }
            EvalError::InvalidCurve | EvalError::TargetMissing { .. } => {
                CliError::Internal(err.to_string())
            }
            EvalError::Reorder(inner) => inner.into(),
            EvalError::Inference(inner) => inner.into(),
        }
    }
}

impl From<RunDirError> for CliError {
    fn from(err: RunDirError) -> Self {
        match &err {
            RunDirError::Serialize(_) | RunDirError::Profile(_) => {
                CliError::Internal(err.to_string())
            }
            _ => CliError::Storage(err.to_string()),
        }
    }
}
