//! Canonical MCQA dataset types and validation.
//!
//! A dataset is a fixed catalog of answer options shared by every sample,
//! plus (query, target) samples. Options are identified by their index in
//! the catalog; the label strings are presentation-layer only. All types are
//! immutable after construction and safe to share across threads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Characters stripped from the end of a label during normalization.
const TERMINAL_PUNCTUATION: &[char] = &['.', ',', '!', '?', ';', ':'];

/// Normalize a label or model answer for matching.
///
/// Lowercases, trims surrounding whitespace, strips terminal punctuation
/// (`.,!?;:`), and collapses internal whitespace runs to a single space.
/// Idempotent; may return an empty string (callers treat empty as a
/// non-match).
pub fn normalize_label(text: &str) -> String {
    let lower = text.to_lowercase();
    let mut out: String = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    // Stripping trailing punctuation can expose trailing whitespace (and
    // vice versa), so trim both until the string is stable.
    loop {
        let trimmed = out
            .trim_end()
            .trim_end_matches(TERMINAL_PUNCTUATION)
            .to_string();
        if trimmed == out {
            return out;
        }
        out = trimmed;
    }
}

/// The ordered catalog of answer options shared by all samples of a dataset.
///
/// The position of a label in `labels` is the option's canonical index;
/// every [`Arrangement`](crate::arrangement::Arrangement) is a rearrangement
/// of these indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionCatalog {
    labels: Vec<String>,
}

impl OptionCatalog {
    /// Build a catalog, enforcing its invariants: at least two options, no
    /// empty labels, and all labels distinct after [`normalize_label`].
    pub fn new(labels: Vec<String>) -> Result<Self, DatasetError> {
        if labels.len() < 2 {
            return Err(DatasetError::TooFewOptions { count: labels.len() });
        }
        let mut seen = std::collections::HashMap::new();
        for (index, label) in labels.iter().enumerate() {
            let normalized = normalize_label(label);
            if normalized.is_empty() {
                return Err(DatasetError::EmptyLabel { index });
            }
            if let Some(&first) = seen.get(&normalized) {
                return Err(DatasetError::DuplicateLabelAfterNormalization {
                    first,
                    second: index,
                    normalized,
                });
            }
            seen.insert(normalized, index);
        }
        Ok(OptionCatalog { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Index of the option whose label equals `label` verbatim.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// One MCQA sample: a query with exactly one correct option.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqaSample {
    pub id: String,
    pub query: String,
    /// Catalog index of the correct option.
    pub target: usize,
}

/// A named dataset: one catalog plus its samples, in file order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqaDataset {
    pub name: String,
    pub catalog: OptionCatalog,
    pub samples: Vec<McqaSample>,
}

impl McqaDataset {
    pub fn new(
        name: impl Into<String>,
        catalog: OptionCatalog,
        samples: Vec<McqaSample>,
    ) -> Result<Self, DatasetError> {
        McqaDataset {
            name: name.into(),
            catalog,
            samples,
        }
        .validate()
    }

    /// Validate and return the dataset.
    ///
    /// The catalog invariants are enforced by [`OptionCatalog::new`]; this
    /// checks the sample-level ones: unique ids, targets in range, non-empty
    /// queries.
    pub fn validate(self) -> Result<Self, DatasetError> {
        let n = self.catalog.len();
        let mut ids = std::collections::HashSet::new();
        for sample in &self.samples {
            if !ids.insert(sample.id.as_str()) {
                return Err(DatasetError::DuplicateId {
                    id: sample.id.clone(),
                });
            }
            if sample.target >= n {
                return Err(DatasetError::TargetOutOfRange {
                    id: sample.id.clone(),
                    target: sample.target,
                    options: n,
                });
            }
            if sample.query.trim().is_empty() {
                return Err(DatasetError::EmptyQuery {
                    id: sample.id.clone(),
                });
            }
        }
        Ok(self)
    }

    pub fn option_count(&self) -> usize {
        self.catalog.len()
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }
}

/// Validation failures for catalogs and datasets.
#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("catalog needs at least 2 options, got {count}")]
    TooFewOptions { count: usize },
    #[error("label at index {index} is empty after normalization")]
    EmptyLabel { index: usize },
    #[error(
        "labels at indices {first} and {second} both normalize to \"{normalized}\""
    )]
    DuplicateLabelAfterNormalization {
        first: usize,
        second: usize,
        normalized: String,
    },
    #[error("duplicate sample id \"{id}\"")]
    DuplicateId { id: String },
    #[error("sample \"{id}\": target {target} out of range for {options} options")]
    TargetOutOfRange {
        id: String,
        target: usize,
        options: usize,
    },
    #[error("sample \"{id}\": query is empty")]
    EmptyQuery { id: String },
}
