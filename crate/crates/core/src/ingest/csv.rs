//! Thin converter from (utterance, intent) CSV files to the canonical format.
//!
//! The public intent-classification sets ship as two-column CSVs, one row per
//! utterance with its intent name. This adapter turns such a file into an
//! in-memory [`McqaDataset`]: the catalog is the set of intent names in order
//! of first appearance, each row becomes one sample, and ids are generated
//! from the dataset name and row number.

use std::path::Path;

use crate::dataset::{McqaDataset, McqaSample, OptionCatalog};
use crate::ingest::IngestError;

/// Column layout of the source CSV.
#[derive(Debug, Clone, Copy)]
pub struct CsvLayout {
    /// Zero-based column holding the query/utterance text.
    pub query_column: usize,
    /// Zero-based column holding the intent/label text.
    pub label_column: usize,
    /// Skip the first row as a header.
    pub has_header: bool,
}

impl Default for CsvLayout {
    /// The common `text,category` layout with a header row.
    fn default() -> Self {
        CsvLayout {
            query_column: 0,
            label_column: 1,
            has_header: true,
        }
    }
}

/// Convert a CSV file into a validated dataset named `name`.
pub fn dataset_from_csv(
    name: &str,
    path: &Path,
    layout: CsvLayout,
) -> Result<McqaDataset, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(layout.has_header)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_open_error(path, e))?;

    let needed = layout.query_column.max(layout.label_column) + 1;
    let mut labels: Vec<String> = Vec::new();
    let mut rows: Vec<(String, usize)> = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let line = index + 1 + usize::from(layout.has_header);
        let record = record.map_err(|e| IngestError::MalformedRecord {
            line,
            reason: e.to_string(),
        })?;
        if record.len() < needed {
            return Err(IngestError::MalformedRecord {
                line,
                reason: format!("expected at least {needed} columns, got {}", record.len()),
            });
        }
        let query = record[layout.query_column].to_string();
        let label = record[layout.label_column].to_string();
        let target = match labels.iter().position(|l| *l == label) {
            Some(i) => i,
            None => {
                labels.push(label);
                labels.len() - 1
            }
        };
        rows.push((query, target));
    }

    let catalog = OptionCatalog::new(labels)?;
    let width = rows.len().to_string().len().max(4);
    let samples = rows
        .into_iter()
        .enumerate()
        .map(|(i, (query, target))| McqaSample {
            id: format!("{name}-{i:0width$}"),
            query,
            target,
        })
        .collect();
    McqaDataset {
        name: name.to_string(),
        catalog,
        samples,
    }
    .validate()
    .map_err(IngestError::Invalid)
}

fn csv_open_error(path: &Path, e: csv::Error) -> IngestError {
    match e.kind() {
        csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            IngestError::FileNotFound {
                path: path.to_path_buf(),
            }
        }
        _ => IngestError::MalformedRecord {
            line: 0,
            reason: e.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn converts_text_category_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "text,category").unwrap();
        writeln!(f, "I need a new PIN,change_pin").unwrap();
        writeln!(f, "\"card lost, please help\",lost_or_stolen_card").unwrap();
        writeln!(f, "set a new pin,change_pin").unwrap();
        drop(f);

        let dataset = dataset_from_csv("bank", &path, CsvLayout::default()).unwrap();
        assert_eq!(
            dataset.catalog.labels(),
            &["change_pin".to_string(), "lost_or_stolen_card".to_string()]
        );
        assert_eq!(dataset.samples.len(), 3);
        assert_eq!(dataset.samples[1].query, "card lost, please help");
        assert_eq!(dataset.samples[1].target, 1);
        assert_eq!(dataset.samples[2].target, 0);
    }

    #[test]
    fn short_row_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.csv");
        std::fs::write(&path, "text,category\nonly-one-column\n").unwrap();
        let err = dataset_from_csv("bank", &path, CsvLayout::default()).unwrap_err();
        assert!(matches!(err, IngestError::MalformedRecord { line: 2, .. }));
    }
}
