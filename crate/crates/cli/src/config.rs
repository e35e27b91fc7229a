//! Run configuration: a TOML file plus `--set key.path=value` overrides,
//! merged into one resolved document whose canonical-JSON hash stamps every
//! artifact the run writes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mcqa::embedding::EmbeddingMode;
use mcqa::eval::FailureMode;
use mcqa::inference::{ChatModelSpec, PromptTemplate};
use mcqa::reorder::{PositionProfile, Strategy};
use mcqa::similarity::SimilarityMetric;
use mcqa::Seed;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingSection>,
    #[serde(default)]
    pub similarity: SimilaritySection,
    #[serde(default)]
    pub strategy: StrategySection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ChatModelSpec>,
    #[serde(default)]
    pub template: TemplateSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingSection {
    /// Deterministic seeded embedder; no network.
    Hash {
        seed: u64,
        dimension: usize,
        #[serde(default = "default_mode")]
        mode: EmbeddingMode,
    },
    /// OpenAI-style embeddings endpoint.
    Remote {
        endpoint: String,
        model: String,
        dimension: usize,
        #[serde(default = "default_mode")]
        mode: EmbeddingMode,
        /// Environment variable naming the bearer token. The token itself
        /// never appears in config or output files.
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

fn default_mode() -> EmbeddingMode {
    EmbeddingMode::Token
}

fn default_timeout_ms() -> u64 {
    30_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilaritySection {
    #[serde(default = "default_metric")]
    pub metric: SimilarityMetric,
    #[serde(default)]
    pub pre_normalize: bool,
}

impl Default for SimilaritySection {
    fn default() -> Self {
        SimilaritySection {
            metric: default_metric(),
            pre_normalize: false,
        }
    }
}

fn default_metric() -> SimilarityMetric {
    SimilarityMetric::TokenMeanCosine
}

/// Strategy as configured. Differs from the runtime strategy type in one
/// way: the model-bias profile is referenced by path, not inlined.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategySection {
    NoSort,
    Descending,
    Ascending,
    DescAsc,
    ModelBias { profile: PathBuf },
    Oracle,
    Random { seed: u64 },
    PlaceTarget { position: usize },
}

impl Default for StrategySection {
    fn default() -> Self {
        StrategySection::NoSort
    }
}

impl StrategySection {
    pub fn resolve(&self, base_dir: &Path) -> Result<Strategy, CliError> {
        Ok(match self {
            StrategySection::NoSort => Strategy::NoSort,
            StrategySection::Descending => Strategy::Descending,
            StrategySection::Ascending => Strategy::Ascending,
            StrategySection::DescAsc => Strategy::DescAsc,
            StrategySection::ModelBias { profile } => {
                let path = anchor(base_dir, profile);
                Strategy::ModelBias {
                    profile: PositionProfile::from_json_file(&path)?,
                }
            }
            StrategySection::Oracle => Strategy::Oracle,
            StrategySection::Random { seed } => Strategy::Random { seed: Seed(*seed) },
            StrategySection::PlaceTarget { position } => {
                Strategy::PlaceTarget { position: *position }
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSection {
    /// `"default"` for the built-in template, or a path to a JSON file with
    /// `preamble`, `option_line_format`, and `instruction` fields.
    pub source: String,
}

impl Default for TemplateSection {
    fn default() -> Self {
        TemplateSection {
            source: "default".into(),
        }
    }
}

impl TemplateSection {
    pub fn resolve(&self, base_dir: &Path) -> Result<PromptTemplate, CliError> {
        if self.source == "default" {
            return Ok(PromptTemplate::default());
        }
        let path = anchor(base_dir, Path::new(&self.source));
        let text = fs::read_to_string(&path).map_err(|e| CliError::from_io(&path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("template {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Embedding cache location; omitted means no cache.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub failure_mode: FailureMode,
    /// Sweep every stride-th position. 1 sweeps all of them.
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// k values for coverage tables in score-driven evaluations.
    #[serde(default = "default_top_k")]
    pub top_k: Vec<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            concurrency: default_concurrency(),
            output_dir: default_output_dir(),
            cache_dir: None,
            failure_mode: FailureMode::default(),
            stride: default_stride(),
            top_k: default_top_k(),
        }
    }
}

fn default_concurrency() -> usize {
    4
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_stride() -> usize {
    1
}

fn default_top_k() -> Vec<usize> {
    vec![1, 10]
}

/// The loaded config, the merged document it came from, and that
/// document's hash. Relative paths inside `config` stay as written; use
/// [`ResolvedConfig::anchored`] helpers to resolve them.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub config: RunConfig,
    /// Canonical JSON of the merged TOML document (file + overrides).
    pub resolved: serde_json::Value,
    /// Hex SHA-256 of the canonical JSON text; embedded in every artifact.
    pub hash: String,
    /// Directory of the config file; relative paths resolve against it.
    pub base_dir: PathBuf,
}

impl ResolvedConfig {
    pub fn short_hash(&self) -> &str {
        &self.hash[..8]
    }

    pub fn manifest_path(&self) -> PathBuf {
        anchor(&self.base_dir, &self.config.dataset.manifest)
    }

    pub fn output_dir(&self) -> PathBuf {
        anchor(&self.base_dir, &self.config.run.output_dir)
    }

    pub fn cache_dir(&self) -> Option<PathBuf> {
        self.config
            .run
            .cache_dir
            .as_ref()
            .map(|dir| anchor(&self.base_dir, dir))
    }
}

fn anchor(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Read a config file, apply `--set` overrides, and hash the merge.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ResolvedConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::from_io(path, e))?;
    let mut document: toml::Value = toml::from_str(&text)
        .map_err(|e| CliError::Data(format!("config {}: {e}", path.display())))?;
    for entry in overrides {
        apply_override(&mut document, entry)?;
    }
    let config: RunConfig = document
        .clone()
        .try_into()
        .map_err(|e| CliError::Data(format!("config {}: {e}", path.display())))?;
    let resolved = serde_json::to_value(&document)
        .map_err(|e| CliError::Internal(format!("canonicalizing config: {e}")))?;
    // serde_json maps are ordered, so this serialization is canonical.
    let canonical = serde_json::to_string(&resolved)
        .map_err(|e| CliError::Internal(format!("canonicalizing config: {e}")))?;
    let hash = hex::encode(Sha256::digest(canonical.as_bytes()));
    let base_dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(ResolvedConfig {
        config,
        resolved,
        hash,
        base_dir,
    })
}

/// Apply one `dotted.path=value` override. The value parses as a TOML
/// literal when possible (numbers, booleans, arrays) and falls back to a
/// plain string.
fn apply_override(document: &mut toml::Value, entry: &str) -> Result<(), CliError> {
    let (path, raw) = entry
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override {entry:?} is not key.path=value")))?;
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(CliError::Usage(format!("override key {path:?} has an empty segment")));
    }
    let value = parse_toml_literal(raw);

    let mut cursor = document;
    for segment in &segments[..segments.len() - 1] {
        let table = cursor
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("override {path:?} crosses a non-table value")))?;
        cursor = table
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
    }
    let leaf = segments.last().expect("split never yields zero segments");
    let table = cursor
        .as_table_mut()
        .ok_or_else(|| CliError::Usage(format!("override {path:?} crosses a non-table value")))?;
    table.insert(leaf.to_string(), value);
    Ok(())
}

fn parse_toml_literal(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Value>(&wrapped) {
        Ok(toml::Value::Table(mut t)) => t.remove("v").expect("v was just parsed"),
        _ => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("run.toml");
        let mut file = fs::File::create(&path).unwrap();
        file.write_all(body.as_bytes()).unwrap();
        path
    }

    const MINIMAL: &str = r#"
[dataset]
manifest = "data/manifest.json"

[embedding]
kind = "hash"
seed = 17
dimension = 32

[strategy]
kind = "descending"

[model]
model_id = "decay"
kind = "positional_decay_mock"
base = 0.9
decay = 0.6
seed = 23
"#;

    #[test]
    fn parses_sections_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), MINIMAL);
        let resolved = load_config(&path, &[]).unwrap();
        let config = &resolved.config;
        assert!(matches!(
            config.embedding,
            Some(EmbeddingSection::Hash { seed: 17, dimension: 32, mode: EmbeddingMode::Token })
        ));
        assert!(matches!(config.strategy, StrategySection::Descending));
        assert_eq!(config.similarity.metric, SimilarityMetric::TokenMeanCosine);
        assert_eq!(config.run.concurrency, 4);
        assert_eq!(config.run.top_k, vec![1, 10]);
        let model = config.model.as_ref().unwrap();
        assert_eq!(model.model_id, "decay");
        assert!(model.is_mock());
        assert_eq!(resolved.hash.len(), 64);
        // Relative paths anchor to the config directory.
        assert_eq!(resolved.manifest_path(), dir.path().join("data/manifest.json"));
    }

    #[test]
    fn overrides_change_values_and_the_hash() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), MINIMAL);
        let plain = load_config(&path, &[]).unwrap();
        let tweaked =
            load_config(&path, &["model.decay=0.5".into(), "run.concurrency=2".into()]).unwrap();
        assert_ne!(plain.hash, tweaked.hash);
        assert_eq!(tweaked.config.run.concurrency, 2);
        match &tweaked.config.model.as_ref().unwrap().kind {
            mcqa::inference::ChatModelKind::PositionalDecayMock { decay, .. } => {
                assert_eq!(*decay, 0.5)
            }
            other => panic!("unexpected kind {other:?}"),
        }
        // Same overrides, same hash.
        let again =
            load_config(&path, &["model.decay=0.5".into(), "run.concurrency=2".into()]).unwrap();
        assert_eq!(again.hash, tweaked.hash);
    }

    #[test]
    fn override_values_keep_their_toml_types() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), MINIMAL);
        let resolved = load_config(
            &path,
            &[
                "run.top_k=[1, 5, 25]".into(),
                "similarity.pre_normalize=true".into(),
                "template.source=custom.json".into(),
            ],
        )
        .unwrap();
        assert_eq!(resolved.config.run.top_k, vec![1, 5, 25]);
        assert!(resolved.config.similarity.pre_normalize);
        assert_eq!(resolved.config.template.source, "custom.json");
    }

    #[test]
    fn malformed_overrides_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), MINIMAL);
        let err = load_config(&path, &["no-equals-sign".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = load_config(&path, &["model..decay=1".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn missing_config_file_maps_to_not_found() {
        let err = load_config(Path::new("/nonexistent/run.toml"), &[]).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn model_section_round_trips_remote_kind() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"
[dataset]
manifest = "m.json"

[model]
model_id = "srv"
kind = "remote"
endpoint = "http://127.0.0.1:1/v1/chat/completions"
api_key_env = "CHAT_TOKEN"
"#;
        let path = write_config(dir.path(), body);
        let resolved = load_config(&path, &[]).unwrap();
        match &resolved.config.model.as_ref().unwrap().kind {
            mcqa::inference::ChatModelKind::Remote {
                endpoint,
                api_key_env,
                max_output_tokens,
            } => {
                assert_eq!(endpoint, "http://127.0.0.1:1/v1/chat/completions");
                assert_eq!(api_key_env.as_deref(), Some("CHAT_TOKEN"));
                assert_eq!(*max_output_tokens, 32);
            }
            other => panic!("unexpected kind {other:?}"),
        }
    }
}
