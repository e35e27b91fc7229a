//! Loading, saving, and summarizing datasets on disk.
//!
//! The canonical on-disk format is three files:
//!
//! - a manifest: one JSON object naming the dataset and pointing at the other
//!   two files, with optional declared counts that are checked after loading;
//! - a catalog: one JSON array of label strings, in canonical option order;
//! - samples: JSON lines, one object per sample with fields `id`, `query`,
//!   and `label` (the label text, which must equal a catalog entry verbatim).
//!
//! Labels are resolved to catalog indices at load time, so sample files stay
//! robust against catalog reordering mistakes. Loading preserves sample
//! order, and [`save_dataset`] writes a byte-stable serialization that
//! round-trips through [`load_dataset`] unchanged.

pub mod csv;

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, McqaDataset, McqaSample, OptionCatalog};

/// Points at a dataset's files and optionally declares expected counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    /// Path to the catalog file; relative paths resolve against the manifest's
    /// own directory.
    pub catalog_path: PathBuf,
    /// Path to the samples file; same resolution rule.
    pub samples_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_option_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_sample_count: Option<usize>,
}

impl DatasetManifest {
    /// Read a manifest from a JSON file.
    pub fn from_file(path: &Path) -> Result<Self, IngestError> {
        let text = read_file(path)?;
        let mut manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|source| IngestError::MalformedManifest {
                path: path.to_path_buf(),
                source,
            })?;
        if let Some(dir) = path.parent() {
            if manifest.catalog_path.is_relative() {
                manifest.catalog_path = dir.join(&manifest.catalog_path);
            }
            if manifest.samples_path.is_relative() {
                manifest.samples_path = dir.join(&manifest.samples_path);
            }
        }
        Ok(manifest)
    }
}

/// One line of a samples file.
#[derive(Debug, Serialize, Deserialize)]
struct SampleRecord {
    id: String,
    query: String,
    label: String,
}

/// Load and validate the dataset a manifest points at.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<McqaDataset, IngestError> {
    let catalog_text = read_file(&manifest.catalog_path)?;
    let labels: Vec<String> =
        serde_json::from_str(&catalog_text).map_err(|source| IngestError::MalformedCatalog {
            path: manifest.catalog_path.clone(),
            source,
        })?;
    let catalog = OptionCatalog::new(labels)?;

    let file = fs::File::open(&manifest.samples_path).map_err(|source| io_error(
        &manifest.samples_path,
        source,
    ))?;
    let mut samples = Vec::new();
    for (line_index, line) in BufReader::new(file).lines().enumerate() {
        let line_number = line_index + 1;
        let line = line.map_err(|source| io_error(&manifest.samples_path, source))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SampleRecord =
            serde_json::from_str(&line).map_err(|e| IngestError::MalformedRecord {
                line: line_number,
                reason: e.to_string(),
            })?;
        let target =
            catalog
                .index_of(&record.label)
                .ok_or_else(|| IngestError::MalformedRecord {
                    line: line_number,
                    reason: format!("label \"{}\" not found in catalog", record.label),
                })?;
        samples.push(McqaSample {
            id: record.id,
            query: record.query,
            target,
        });
    }

    if let Some(declared) = manifest.declared_option_count {
        if declared != catalog.len() {
            return Err(IngestError::CountMismatch {
                what: "option",
                declared,
                actual: catalog.len(),
            });
        }
    }
    if let Some(declared) = manifest.declared_sample_count {
        if declared != samples.len() {
            return Err(IngestError::CountMismatch {
                what: "sample",
                declared,
                actual: samples.len(),
            });
        }
    }

    let dataset = McqaDataset {
        name: manifest.name.clone(),
        catalog,
        samples,
    };
    Ok(dataset.validate()?)
}

/// Write a dataset in the canonical format.
///
/// The output is byte-stable: saving the same dataset twice yields identical
/// files, and loading them back yields an identical dataset.
pub fn save_dataset(
    dataset: &McqaDataset,
    catalog_path: &Path,
    samples_path: &Path,
) -> Result<(), IngestError> {
    let catalog_json = serde_json::to_string_pretty(dataset.catalog.labels())
        .expect("label list serializes");
    fs::write(catalog_path, format!("{catalog_json}\n"))
        .map_err(|source| io_error(catalog_path, source))?;

    let mut out = Vec::new();
    for sample in &dataset.samples {
        let record = SampleRecord {
            id: sample.id.clone(),
            query: sample.query.clone(),
            label: dataset
                .catalog
                .label(sample.target)
                .expect("validated target")
                .to_string(),
        };
        serde_json::to_writer(&mut out, &record).expect("record serializes");
        out.push(b'\n');
    }
    let mut file =
        fs::File::create(samples_path).map_err(|source| io_error(samples_path, source))?;
    file.write_all(&out)
        .map_err(|source| io_error(samples_path, source))?;
    Ok(())
}

/// Summary statistics for a loaded dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub option_count: usize,
    pub sample_count: usize,
    /// Count of samples whose target is option `i`, in canonical order.
    pub target_histogram: Vec<usize>,
    /// Mean query length in whitespace-separated tokens.
    pub mean_query_tokens: f64,
}

pub fn dataset_stats(dataset: &McqaDataset) -> DatasetStats {
    let n = dataset.catalog.len();
    let mut histogram = vec![0usize; n];
    let mut token_total = 0usize;
    for sample in &dataset.samples {
        if sample.target < n {
            histogram[sample.target] += 1;
        }
        token_total += sample.query.split_whitespace().count();
    }
    let count = dataset.samples.len();
    DatasetStats {
        option_count: n,
        sample_count: count,
        target_histogram: histogram,
        mean_query_tokens: if count == 0 {
            0.0
        } else {
            token_total as f64 / count as f64
        },
    }
}

fn read_file(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| io_error(path, source))
}

fn io_error(path: &Path, source: std::io::Error) -> IngestError {
    if source.kind() == std::io::ErrorKind::NotFound {
        IngestError::FileNotFound {
            path: path.to_path_buf(),
        }
    } else {
        IngestError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("file not found: {path}")]
    FileNotFound { path: PathBuf },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest {path}: {source}")]
    MalformedManifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("malformed catalog {path}: {source}")]
    MalformedCatalog {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("{what} count mismatch: manifest declares {declared}, loaded {actual}")]
    CountMismatch {
        what: &'static str,
        declared: usize,
        actual: usize,
    },
    #[error(transparent)]
    Invalid(#[from] DatasetError),
}
