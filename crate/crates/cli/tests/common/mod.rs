#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use mcqa::ingest::save_dataset;
use mcqa::McqaDataset;

/// Load one of the bundled intent catalogs by stem, e.g. "banking77".
pub fn fixture_catalog(stem: &str) -> Vec<String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/catalogs")
        .join(format!("{stem}.json"));
    let text = fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("parsing {}: {e}", path.display()))
}

/// Write `dataset` as catalog + samples + manifest under `dir/data` and
/// return the manifest path.
pub fn write_dataset(dir: &Path, dataset: &McqaDataset) -> PathBuf {
    let data = dir.join("data");
    fs::create_dir_all(&data).unwrap();
    save_dataset(dataset, &data.join("catalog.json"), &data.join("samples.jsonl")).unwrap();
    let manifest = data.join("manifest.json");
    let body = serde_json::json!({
        "name": dataset.name,
        "catalog_path": "catalog.json",
        "samples_path": "samples.jsonl",
        "declared_option_count": dataset.option_count(),
        "declared_sample_count": dataset.sample_count(),
    });
    fs::write(&manifest, format!("{body}\n")).unwrap();
    manifest
}

pub fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

/// The run directories under `output_dir` whose names start with `prefix`,
/// sorted by name.
pub fn run_dirs(output_dir: &Path, prefix: &str) -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(output_dir)
        .unwrap()
        .filter_map(|entry| {
            let path = entry.unwrap().path();
            let name = path.file_name()?.to_str()?;
            (path.is_dir() && name.starts_with(prefix)).then(|| path.clone())
        })
        .collect();
    dirs.sort();
    dirs
}

pub fn single_run_dir(output_dir: &Path, prefix: &str) -> PathBuf {
    let dirs = run_dirs(output_dir, prefix);
    assert_eq!(dirs.len(), 1, "expected one {prefix}* run dir, found {dirs:?}");
    dirs.into_iter().next().unwrap()
}

pub fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&read(path)).unwrap_or_else(|e| panic!("parsing {}: {e}", path.display()))
}
