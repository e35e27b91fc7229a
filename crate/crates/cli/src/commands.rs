//! The five subcommands. Each returns a human-readable report for stdout;
//! run directories and score files carry the machine-readable output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;

use mcqa::arrangement::{Arrangement, ArrangementKind};
use mcqa::dataset::McqaDataset;
use mcqa::embedding::cache::{CachedProvider, EmbeddingCache};
use mcqa::embedding::hash::HashEmbedder;
use mcqa::embedding::remote::{RemoteEmbedder, RemoteEmbeddingConfig};
use mcqa::embedding::EmbeddingProvider;
use mcqa::eval::{
    cumulative_distribution, evaluate_strategy, position_sweep, strided_positions,
    target_position_histogram, topk_coverage, bias_profile_from_sweep,
};
use mcqa::inference::remote::RemoteTransport;
use mcqa::inference::{build_model, ChatModelSpec};
use mcqa::ingest::{dataset_stats, load_dataset, DatasetManifest};
use mcqa::rundir::{is_complete, read_metadata, RunDir, RunMetadata, RunTiming};
use mcqa::similarity::{score_dataset, OptionScores, ScoreSettings};
use mcqa::Seed;

use crate::config::{EmbeddingSection, ResolvedConfig};
use crate::error::CliError;

/// Size the global worker pool once per process. Later calls with a
/// different configured concurrency are no-ops; results do not depend on
/// worker count, only throughput does.
fn init_workers(concurrency: usize) {
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency.max(1))
        .build_global();
}

fn transport_for(resolved: &ResolvedConfig) -> RemoteTransport {
    RemoteTransport {
        max_in_flight: resolved.config.run.concurrency.max(1),
        ..RemoteTransport::default()
    }
}

fn load_configured_dataset(resolved: &ResolvedConfig) -> Result<McqaDataset, CliError> {
    let manifest = DatasetManifest::from_file(&resolved.manifest_path())?;
    Ok(load_dataset(&manifest)?)
}

fn require_model(resolved: &ResolvedConfig) -> Result<&ChatModelSpec, CliError> {
    resolved
        .config
        .model
        .as_ref()
        .ok_or_else(|| CliError::Config("this command needs a [model] section".into()))
}

/// Build the configured embedding provider, wrap it in the cache when one
/// is configured, and hand it to `f`. Returns `f`'s result plus the
/// provider id for provenance records.
fn with_provider<T>(
    resolved: &ResolvedConfig,
    f: impl FnOnce(&dyn EmbeddingProvider) -> Result<T, CliError>,
) -> Result<(T, String), CliError> {
    let section = resolved.config.embedding.as_ref().ok_or_else(|| {
        CliError::Config("this command computes similarity scores and needs an [embedding] section".into())
    })?;
    let inner: Box<dyn EmbeddingProvider> = match section {
        EmbeddingSection::Hash { seed, dimension, mode } => {
            Box::new(HashEmbedder::new(Seed(*seed), *dimension, *mode))
        }
        EmbeddingSection::Remote {
            endpoint,
            model,
            dimension,
            mode,
            api_key_env,
            timeout_ms,
        } => {
            let mut config =
                RemoteEmbeddingConfig::new(endpoint.clone(), model.clone(), *mode, *dimension);
            config.api_key_env = api_key_env.clone();
            config.timeout = Duration::from_millis(*timeout_ms);
            config.max_in_flight = resolved.config.run.concurrency.max(1);
            Box::new(RemoteEmbedder::new(config)?)
        }
    };
    let id = inner.id().to_string();
    match resolved.cache_dir() {
        Some(dir) => {
            let cache = EmbeddingCache::new(dir)?;
            let cached = CachedProvider::new(inner, &cache);
            Ok((f(&cached)?, id))
        }
        None => Ok((f(inner.as_ref())?, id)),
    }
}

fn compute_scores(
    resolved: &ResolvedConfig,
    dataset: &McqaDataset,
) -> Result<(Vec<OptionScores>, String), CliError> {
    let metric = resolved.config.similarity.metric;
    let settings = ScoreSettings {
        pre_normalize: resolved.config.similarity.pre_normalize,
    };
    with_provider(resolved, |provider| {
        score_dataset(dataset, provider, metric, settings).map_err(CliError::from)
    })
}

struct TimingClock {
    started: SystemTime,
    stopwatch: Instant,
}

impl TimingClock {
    fn start() -> Self {
        TimingClock {
            started: SystemTime::now(),
            stopwatch: Instant::now(),
        }
    }

    fn finish(&self) -> RunTiming {
        let to_ms = |t: SystemTime| {
            t.duration_since(UNIX_EPOCH)
                .unwrap_or(Duration::ZERO)
                .as_millis() as u64
        };
        let wall = self.stopwatch.elapsed().as_millis() as u64;
        let started = to_ms(self.started);
        RunTiming {
            started_unix_ms: started,
            finished_unix_ms: started + wall,
            wall_ms: wall,
        }
    }
}

/// Load a manifest, validate everything it points at, and summarize.
pub fn cmd_validate(manifest_path: &Path) -> Result<String, CliError> {
    let manifest = DatasetManifest::from_file(manifest_path)?;
    let dataset = load_dataset(&manifest)?;
    let stats = dataset_stats(&dataset);
    let covered = stats.target_histogram.iter().filter(|&&c| c > 0).count();
    let mut report = format!(
        "{}: {} options, {} samples",
        dataset.name, stats.option_count, stats.sample_count
    );
    let _ = write!(report, "\nmean query length: {:.1} tokens", stats.mean_query_tokens);
    let _ = write!(report, "\ntargets cover {covered} of {} options", stats.option_count);
    report.push_str("\nok");
    Ok(report)
}

#[derive(Serialize)]
struct ScoreLine<'a> {
    sample_id: &'a str,
    metric: &'a str,
    provider_id: &'a str,
    scores: &'a [f64],
}

/// Score every sample's options against its query and write one JSON line
/// per sample. Reruns with the same config produce identical bytes.
pub fn cmd_score(resolved: &ResolvedConfig, out: Option<&Path>) -> Result<String, CliError> {
    init_workers(resolved.config.run.concurrency);
    let dataset = load_configured_dataset(resolved)?;
    let (scores, provider_id) = compute_scores(resolved, &dataset)?;

    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| resolved.output_dir().join("scores.jsonl"));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Storage(format!("{}: {e}", parent.display())))?;
    }
    let metric = resolved.config.similarity.metric.as_str();
    let mut buffer = Vec::new();
    for entry in &scores {
        let line = ScoreLine {
            sample_id: entry.sample_id(),
            metric,
            provider_id: &provider_id,
            scores: entry.scores(),
        };
        serde_json::to_writer(&mut buffer, &line)
            .map_err(|e| CliError::Internal(format!("serializing score line: {e}")))?;
        buffer.push(b'\n');
    }
    fs::write(&path, &buffer).map_err(|e| CliError::Storage(format!("{}: {e}", path.display())))?;

    Ok(format!(
        "scored {} samples x {} options ({metric} via {provider_id})\nwrote {}",
        dataset.sample_count(),
        dataset.option_count(),
        path.display()
    ))
}

/// Move the correct option through the configured positions and record
/// accuracy at each one.
pub fn cmd_sweep(resolved: &ResolvedConfig) -> Result<String, CliError> {
    init_workers(resolved.config.run.concurrency);
    let clock = TimingClock::start();
    let dataset = load_configured_dataset(resolved)?;
    let spec = require_model(resolved)?;
    let template = resolved.config.template.resolve(&resolved.base_dir)?;
    let model = build_model(spec, &transport_for(resolved))?;

    let stride = resolved.config.run.stride;
    let positions = strided_positions(dataset.option_count(), stride)?;
    let mode = resolved.config.run.failure_mode;
    let outcome = position_sweep(model.as_ref(), &template, &dataset, Some(&positions), mode)?;

    let run = RunDir::create(
        &resolved.output_dir(),
        &format!("sweep-{}", resolved.short_hash()),
        &resolved.hash,
    )?;
    let mut details = BTreeMap::new();
    details.insert("positions".to_string(), json!(positions));
    details.insert("stride".to_string(), json!(stride));
    details.insert("failure_mode".to_string(), json!(mode));
    details.insert("option_count".to_string(), json!(dataset.option_count()));
    run.write_metadata(&RunMetadata {
        command: "sweep".into(),
        config_hash: resolved.hash.clone(),
        resolved_config: resolved.resolved.clone(),
        dataset_name: dataset.name.clone(),
        model_id: spec.model_id.clone(),
        template_hash: template.hash(),
        provider_ids: Vec::new(),
        details,
    })?;
    run.write_predictions(&outcome.records)?;
    let cumulative = cumulative_distribution(&outcome.curve);
    run.write_curve(&outcome.curve, &cumulative)?;
    let profile = bias_profile_from_sweep(&outcome.curve, model.id(), &dataset.name)?;
    run.write_profile(&profile)?;
    run.write_timing(&clock.finish())?;
    run.mark_complete()?;

    let first = outcome.curve.accuracy().first().copied().unwrap_or(0.0);
    let last = outcome.curve.accuracy().last().copied().unwrap_or(0.0);
    Ok(format!(
        "swept {} positions x {} samples with {}\naccuracy at first swept position: {first:.4}, at last: {last:.4}\nrun dir: {}",
        positions.len(),
        dataset.sample_count(),
        spec.model_id,
        run.path().display()
    ))
}

/// Evaluate one arrangement strategy over the dataset.
pub fn cmd_eval(resolved: &ResolvedConfig) -> Result<String, CliError> {
    init_workers(resolved.config.run.concurrency);
    let clock = TimingClock::start();
    let dataset = load_configured_dataset(resolved)?;
    let spec = require_model(resolved)?;
    let template = resolved.config.template.resolve(&resolved.base_dir)?;
    let strategy = resolved.config.strategy.resolve(&resolved.base_dir)?;

    let needs_scores = strategy.needs_scores() || spec.needs_scores();
    let (scores, provider_ids) = if needs_scores {
        if resolved.config.embedding.is_none() {
            return Err(CliError::Config(format!(
                "strategy \"{}\" with model \"{}\" needs similarity scores; add an [embedding] section",
                strategy.kind(),
                spec.model_id
            )));
        }
        let (scores, provider_id) = compute_scores(resolved, &dataset)?;
        (Some(scores), vec![provider_id])
    } else {
        (None, Vec::new())
    };

    let model = build_model(spec, &transport_for(resolved))?;
    let mode = resolved.config.run.failure_mode;
    let result = evaluate_strategy(
        model.as_ref(),
        &template,
        &dataset,
        &strategy,
        scores.as_deref(),
        mode,
    )?;

    let arrangements: Vec<Arrangement> = result
        .records
        .iter()
        .map(|r| r.arrangement.clone())
        .collect();
    let arrangement_kind = match arrangements.first().map(Arrangement::kind) {
        Some(ArrangementKind::Duplicated) => "duplicated",
        _ => "permutation",
    };
    let top_k = &resolved.config.run.top_k;
    let coverage = topk_coverage(&dataset, &arrangements, top_k)?;
    let histogram = target_position_histogram(&dataset, &arrangements)?;

    let run = RunDir::create(
        &resolved.output_dir(),
        &format!("eval-{}", resolved.short_hash()),
        &resolved.hash,
    )?;
    let mut details = BTreeMap::new();
    details.insert("strategy".to_string(), json!(strategy.kind()));
    details.insert("arrangement".to_string(), json!(arrangement_kind));
    details.insert("top_k".to_string(), json!(top_k));
    details.insert("failure_mode".to_string(), json!(mode));
    run.write_metadata(&RunMetadata {
        command: "eval".into(),
        config_hash: resolved.hash.clone(),
        resolved_config: resolved.resolved.clone(),
        dataset_name: dataset.name.clone(),
        model_id: spec.model_id.clone(),
        template_hash: template.hash(),
        provider_ids,
        details,
    })?;
    run.write_result_json("strategy.json", &result)?;
    run.write_predictions(&result.records)?;
    run.write_coverage(&coverage)?;
    run.write_histogram(&histogram)?;
    run.write_timing(&clock.finish())?;
    run.mark_complete()?;

    let mut report = format!(
        "{} on {} with {}: accuracy {:.4}, unparsed rate {:.4}",
        result.strategy, result.dataset_name, result.model_id, result.accuracy, result.unparsed_rate
    );
    if result.excluded > 0 {
        let _ = write!(report, " ({} failed samples excluded)", result.excluded);
    }
    let _ = write!(report, "\nrun dir: {}", run.path().display());
    Ok(report)
}

const PLOT_FILES: [&str; 3] = ["curve.csv", "coverage.csv", "histogram.csv"];

/// Gather run directories into one place: copy their plot-ready CSVs and
/// write a summary table.
pub fn cmd_report(runs: &[PathBuf], out: &Path) -> Result<String, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Storage(format!("{}: {e}", out.display())))?;

    let summary_path = out.join("summary.csv");
    let mut writer = csv::Writer::from_path(&summary_path)
        .map_err(|e| CliError::Storage(format!("{}: {e}", summary_path.display())))?;
    writer
        .write_record([
            "run",
            "command",
            "dataset",
            "model",
            "strategy",
            "accuracy",
            "unparsed_rate",
            "config_hash",
            "complete",
        ])
        .map_err(|e| CliError::Storage(format!("{}: {e}", summary_path.display())))?;

    let mut copied = 0usize;
    for dir in runs {
        if !dir.join("metadata.json").is_file() {
            return Err(CliError::NotFound(format!(
                "{} is not a run directory (no metadata.json)",
                dir.display()
            )));
        }
        let metadata = read_metadata(dir)?;
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        let (accuracy, unparsed) = read_strategy_summary(dir);
        let strategy = metadata
            .details
            .get("strategy")
            .and_then(serde_json::Value::as_str)
            .unwrap_or("")
            .to_string();
        writer
            .write_record([
                name.as_str(),
                metadata.command.as_str(),
                metadata.dataset_name.as_str(),
                metadata.model_id.as_str(),
                strategy.as_str(),
                accuracy.as_str(),
                unparsed.as_str(),
                metadata.config_hash.as_str(),
                if is_complete(dir) { "true" } else { "false" },
            ])
            .map_err(|e| CliError::Storage(format!("{}: {e}", summary_path.display())))?;

        for file in PLOT_FILES {
            let source = dir.join(file);
            if source.is_file() {
                let target = out.join(format!("{name}-{file}"));
                fs::copy(&source, &target)
                    .map_err(|e| CliError::Storage(format!("{}: {e}", target.display())))?;
                copied += 1;
            }
        }
    }
    writer
        .flush()
        .map_err(|e| CliError::Storage(format!("{}: {e}", summary_path.display())))?;

    Ok(format!(
        "summarized {} runs, copied {copied} plot files\nwrote {}",
        runs.len(),
        summary_path.display()
    ))
}

/// Accuracy and unparsed-rate columns for the summary table; blank when the
/// run has no strategy.json (sweeps) or it cannot be read.
fn read_strategy_summary(dir: &Path) -> (String, String) {
    let path = dir.join("strategy.json");
    let Ok(text) = fs::read_to_string(&path) else {
        return (String::new(), String::new());
    };
    let Ok(value) = serde_json::from_str::<serde_json::Value>(&text) else {
        return (String::new(), String::new());
    };
    let field = |name: &str| {
        value
            .get(name)
            .and_then(serde_json::Value::as_f64)
            .map(|v| v.to_string())
            .unwrap_or_default()
    };
    (field("accuracy"), field("unparsed_rate"))
}
