//! Run directories: the on-disk layout every evaluation command writes.
//!
//! A run directory holds:
//!
//! - `metadata.json`: the fully-resolved config, its hash, seeds, template
//!   hash, and provider ids;
//! - `predictions.jsonl`: one prediction record per line, sample-major;
//! - result tables as both JSON and CSV (`curve`, `coverage`, `histogram`,
//!   `strategy`), each embedding the config hash;
//! - `profile.json`: a position profile in its own pinned format;
//! - `timing.json`: wall-clock numbers, kept out of every other file so
//!   that repeat runs with one config are byte-identical elsewhere;
//! - `complete`: a sentinel written last. A directory without it is a
//!   partial (interrupted) run.
//!
//! CSV files start with a `# config_hash=...` comment line, then a header
//! row; readers should skip `#` lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{CoverageResult, CumulativeCurve, PositionAccuracyCurve};
use crate::inference::PredictionRecord;
use crate::reorder::PositionProfile;

pub const SENTINEL: &str = "complete";

/// Everything needed to rerun or audit a run. No timestamps: identical
/// configs must produce identical metadata bytes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub command: String,
    pub config_hash: String,
    /// The resolved config after flag overrides, as canonical JSON.
    pub resolved_config: serde_json::Value,
    pub dataset_name: String,
    pub model_id: String,
    pub template_hash: String,
    /// Provider ids taking part in the run (embedders, chat endpoints).
    pub provider_ids: Vec<String>,
    /// Extra command-specific facts: swept positions, strategy kind,
    /// arrangement shape, and the like.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, serde_json::Value>,
}

/// Wall-clock numbers, isolated in their own file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunTiming {
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub wall_ms: u64,
}

/// A created run directory; all writes go through it.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    config_hash: String,
}

impl RunDir {
    /// Create `<parent>/<name>`, appending `-2`, `-3`, ... when the plain
    /// name is taken.
    pub fn create(parent: &Path, name: &str, config_hash: &str) -> Result<RunDir, RunDirError> {
        fs::create_dir_all(parent).map_err(|source| RunDirError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
        for attempt in 1..10_000u32 {
            let candidate = if attempt == 1 {
                parent.join(name)
            } else {
                parent.join(format!("{name}-{attempt}"))
            };
            match fs::create_dir(&candidate) {
                Ok(()) => {
                    return Ok(RunDir {
                        root: candidate,
                        config_hash: config_hash.to_string(),
                    })
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(source) => {
                    return Err(RunDirError::Io {
                        path: candidate,
                        source,
                    })
                }
            }
        }
        Err(RunDirError::TooManyCollisions {
            name: name.to_string(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn write_metadata(&self, metadata: &RunMetadata) -> Result<(), RunDirError> {
        self.write_pretty_json("metadata.json", metadata)
    }

    pub fn write_timing(&self, timing: &RunTiming) -> Result<(), RunDirError> {
        self.write_pretty_json("timing.json", timing)
    }

    /// Serialize `value` with the config hash injected at the top level.
    pub fn write_result_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), RunDirError> {
        #[derive(Serialize)]
        struct Traced<'a, T: Serialize> {
            config_hash: &'a str,
            #[serde(flatten)]
            payload: &'a T,
        }
        self.write_pretty_json(
            name,
            &Traced {
                config_hash: &self.config_hash,
                payload: value,
            },
        )
    }

    fn write_pretty_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), RunDirError> {
        let mut text = serde_json::to_string_pretty(value).map_err(RunDirError::Serialize)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// CSV with a `# config_hash=` comment, a header row, then data rows.
    pub fn write_csv(
        &self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), RunDirError> {
        let mut out = format!("# config_hash={}\n", self.config_hash);
        out.push_str(&header.join(","));
        out.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            let _ = writeln!(out, "{}", row.join(","));
        }
        self.write_bytes(name, out.as_bytes())
    }

    /// Position-accuracy results: `curve.json` + `curve.csv` with columns
    /// position, accuracy, cumulative.
    pub fn write_curve(
        &self,
        curve: &PositionAccuracyCurve,
        cumulative: &CumulativeCurve,
    ) -> Result<(), RunDirError> {
        #[derive(Serialize)]
        struct CurveFile<'a> {
            curve: &'a PositionAccuracyCurve,
            cumulative: &'a CumulativeCurve,
        }
        self.write_result_json("curve.json", &CurveFile { curve, cumulative })?;
        let rows: Vec<Vec<String>> = curve
            .positions()
            .iter()
            .zip(curve.accuracy())
            .zip(&cumulative.cumulative)
            .map(|((p, a), c)| vec![p.to_string(), a.to_string(), c.to_string()])
            .collect();
        self.write_csv("curve.csv", &["position", "accuracy", "cumulative"], &rows)
    }

    /// Top-k coverage: `coverage.json` + `coverage.csv` with columns k, coverage.
    pub fn write_coverage(&self, results: &[CoverageResult]) -> Result<(), RunDirError> {
        #[derive(Serialize)]
        struct CoverageFile<'a> {
            coverage: &'a [CoverageResult],
        }
        self.write_result_json("coverage.json", &CoverageFile { coverage: results })?;
        let rows: Vec<Vec<String>> = results
            .iter()
            .map(|r| vec![r.k.to_string(), r.coverage.to_string()])
            .collect();
        self.write_csv("coverage.csv", &["k", "coverage"], &rows)
    }

    /// Target-position histogram: `histogram.json` + `histogram.csv` with
    /// columns bin, count.
    pub fn write_histogram(&self, histogram: &[u64]) -> Result<(), RunDirError> {
        #[derive(Serialize)]
        struct HistogramFile<'a> {
            histogram: &'a [u64],
        }
        self.write_result_json("histogram.json", &HistogramFile { histogram })?;
        let rows: Vec<Vec<String>> = histogram
            .iter()
            .enumerate()
            .map(|(bin, count)| vec![bin.to_string(), count.to_string()])
            .collect();
        self.write_csv("histogram.csv", &["bin", "count"], &rows)
    }

    /// Position profile in the pinned exchange format (no hash injection:
    /// the file doubles as input for the model-bias strategy).
    pub fn write_profile(&self, profile: &PositionProfile) -> Result<(), RunDirError> {
        let path = self.root.join("profile.json");
        profile
            .to_json_file(&path)
            .map_err(|e| RunDirError::Profile(e.to_string()))
    }

    /// Stream prediction records to `predictions.jsonl`, one per line.
    pub fn write_predictions(&self, records: &[PredictionRecord]) -> Result<(), RunDirError> {
        let path = self.root.join("predictions.jsonl");
        let file = fs::File::create(&path).map_err(|source| RunDirError::Io {
            path: path.clone(),
            source,
        })?;
        let mut out = std::io::BufWriter::new(file);
        for record in records {
            let line = serde_json::to_string(record).map_err(RunDirError::Serialize)?;
            out.write_all(line.as_bytes())
                .and_then(|_| out.write_all(b"\n"))
                .map_err(|source| RunDirError::Io {
                    path: path.clone(),
                    source,
                })?;
        }
        out.flush().map_err(|source| RunDirError::Io {
            path: path.clone(),
            source,
        })
    }

    /// Mark the run finished. Written last; its absence flags a truncated
    /// run, however the process died.
    pub fn mark_complete(&self) -> Result<(), RunDirError> {
        self.write_bytes(SENTINEL, format!("{}\n", self.config_hash).as_bytes())
    }

    fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<(), RunDirError> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|source| RunDirError::Io { path, source })
    }
}

/// Whether `dir` holds a finished run.
pub fn is_complete(dir: &Path) -> bool {
    dir.join(SENTINEL).is_file()
}

/// Read back a run's metadata.
pub fn read_metadata(dir: &Path) -> Result<RunMetadata, RunDirError> {
    let path = dir.join("metadata.json");
    let text = fs::read_to_string(&path).map_err(|source| RunDirError::Io {
        path: path.clone(),
        source,
    })?;
    serde_json::from_str(&text).map_err(RunDirError::Serialize)
}

#[derive(Debug, Error)]
pub enum RunDirError {
    #[error("run directory {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serializing run artifact: {0}")]
    Serialize(#[source] serde_json::Error),
    #[error("writing profile: {0}")]
    Profile(String),
    #[error("could not find a free run directory name for {name}")]
    TooManyCollisions { name: String },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::cumulative_distribution;

    fn sample_curve() -> (PositionAccuracyCurve, CumulativeCurve) {
        let curve =
            PositionAccuracyCurve::new(vec![0, 1, 2], vec![0.5, 0.25, 0.25], 8).unwrap();
        let cumulative = cumulative_distribution(&curve);
        (curve, cumulative)
    }

    fn metadata(hash: &str) -> RunMetadata {
        RunMetadata {
            command: "sweep".into(),
            config_hash: hash.into(),
            resolved_config: serde_json::json!({"model": {"kind": "first_position_mock"}}),
            dataset_name: "fixture".into(),
            model_id: "mock".into(),
            template_hash: "t0".into(),
            provider_ids: vec!["hash:seed=1:d=8".into()],
            details: BTreeMap::new(),
        }
    }

    #[test]
    fn collision_suffixes_allocate_fresh_directories() {
        let parent = tempfile::tempdir().unwrap();
        let a = RunDir::create(parent.path(), "sweep-abcd", "h").unwrap();
        let b = RunDir::create(parent.path(), "sweep-abcd", "h").unwrap();
        let c = RunDir::create(parent.path(), "sweep-abcd", "h").unwrap();
        assert_eq!(a.path().file_name().unwrap(), "sweep-abcd");
        assert_eq!(b.path().file_name().unwrap(), "sweep-abcd-2");
        assert_eq!(c.path().file_name().unwrap(), "sweep-abcd-3");
    }

    #[test]
    fn sentinel_marks_completion() {
        let parent = tempfile::tempdir().unwrap();
        let run = RunDir::create(parent.path(), "r", "hash123").unwrap();
        assert!(!is_complete(run.path()));
        run.mark_complete().unwrap();
        assert!(is_complete(run.path()));
        let content = fs::read_to_string(run.path().join(SENTINEL)).unwrap();
        assert_eq!(content, "hash123\n");
    }

    #[test]
    fn curve_files_embed_the_config_hash_and_documented_columns() {
        let parent = tempfile::tempdir().unwrap();
        let run = RunDir::create(parent.path(), "r", "cafe01").unwrap();
        let (curve, cumulative) = sample_curve();
        run.write_curve(&curve, &cumulative).unwrap();

        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(run.path().join("curve.json")).unwrap())
                .unwrap();
        assert_eq!(json["config_hash"], "cafe01");
        assert_eq!(json["cumulative"]["cumulative"][2], 1.0);

        let csv = fs::read_to_string(run.path().join("curve.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# config_hash=cafe01");
        assert_eq!(lines[1], "position,accuracy,cumulative");
        assert_eq!(lines[2], "0,0.5,0.5");
        assert_eq!(lines[4], "2,0.25,1");
    }

    #[test]
    fn coverage_and_histogram_tables_round_trip() {
        let parent = tempfile::tempdir().unwrap();
        let run = RunDir::create(parent.path(), "r", "h").unwrap();
        run.write_coverage(&[
            CoverageResult { k: 1, coverage: 0.25 },
            CoverageResult { k: 10, coverage: 0.75 },
        ])
        .unwrap();
        run.write_histogram(&[3, 0, 1]).unwrap();

        let coverage = fs::read_to_string(run.path().join("coverage.csv")).unwrap();
        assert!(coverage.contains("k,coverage"));
        assert!(coverage.contains("10,0.75"));
        let histogram = fs::read_to_string(run.path().join("histogram.csv")).unwrap();
        assert!(histogram.contains("bin,count"));
        assert!(histogram.contains("0,3"));
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(run.path().join("histogram.json")).unwrap())
                .unwrap();
        assert_eq!(json["histogram"], serde_json::json!([3, 0, 1]));
    }

    #[test]
    fn metadata_round_trips_without_timestamps() {
        let parent = tempfile::tempdir().unwrap();
        let run = RunDir::create(parent.path(), "r", "deadbeef").unwrap();
        run.write_metadata(&metadata("deadbeef")).unwrap();
        let back = read_metadata(run.path()).unwrap();
        assert_eq!(back.config_hash, "deadbeef");
        assert_eq!(back.command, "sweep");
        let raw = fs::read_to_string(run.path().join("metadata.json")).unwrap();
        assert!(!raw.contains("time"), "metadata must stay timestamp-free");
    }

    #[test]
    fn identical_writes_are_byte_identical() {
        let parent = tempfile::tempdir().unwrap();
        let (curve, cumulative) = sample_curve();
        let mut bytes = Vec::new();
        for name in ["a", "b"] {
            let run = RunDir::create(parent.path(), name, "samehash").unwrap();
            run.write_metadata(&metadata("samehash")).unwrap();
            run.write_curve(&curve, &cumulative).unwrap();
            run.mark_complete().unwrap();
            let mut blob = Vec::new();
            for file in ["metadata.json", "curve.json", "curve.csv", SENTINEL] {
                blob.extend(fs::read(run.path().join(file)).unwrap());
            }
            bytes.push(blob);
        }
        assert_eq!(bytes[0], bytes[1]);
    }
}
