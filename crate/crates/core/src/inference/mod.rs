//! From (query, arrangement) to a scored prediction: prompt rendering,
//! chat-model providers, and parsing the model's reply back onto the
//! catalog.
//!
//! Decoding is pinned for every model kind: temperature 0, sampling
//! disabled. Options render as bare label text, no "A."/"B." identifiers,
//! and the instruction demands the exact option text back; letter
//! identifiers carry their own selection bias, which would confound a
//! positional measurement. Correctness is judged by label identity, not
//! list position, so arrangements that show a label twice stay well
//! defined.

pub mod mock;
pub mod remote;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::arrangement::Arrangement;
use crate::dataset::{normalize_label, McqaSample, OptionCatalog};
use crate::similarity::OptionScores;

/// Decoding temperature used for every request; pinned, not configurable.
pub const TEMPERATURE: f64 = 0.0;

/// Prompt skeleton. `preamble` may contain `{query}`; `option_line_format`
/// may contain `{label}` and `{index}` (1-based list position); the
/// instruction is appended verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub preamble: String,
    pub option_line_format: String,
    pub instruction: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            preamble: "Select the correct label for the query.\n\nQuery: {query}\n\nOptions:\n"
                .to_string(),
            option_line_format: "{label}\n".to_string(),
            instruction: "\nAnswer with the exact text of the correct label and nothing else."
                .to_string(),
        }
    }
}

impl PromptTemplate {
    /// Content hash recorded in run metadata so results are comparable
    /// across runs only when the wording matches.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for part in [&self.preamble, &self.option_line_format, &self.instruction] {
            hasher.update((part.len() as u64).to_le_bytes());
            hasher.update(part.as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

/// Render the prompt: preamble, one line per arranged option, instruction.
pub fn build_prompt(
    template: &PromptTemplate,
    query: &str,
    arrangement: &Arrangement,
    catalog: &OptionCatalog,
) -> Result<String, InferenceError> {
    if !arrangement.is_valid_for(catalog.len()) {
        return Err(InferenceError::InvalidArrangement {
            arrangement_len: arrangement.len(),
            options: catalog.len(),
        });
    }
    let mut prompt = template.preamble.replace("{query}", query);
    for (position, &option) in arrangement.order().iter().enumerate() {
        let label = catalog.label(option).expect("validated arrangement index");
        let line = template
            .option_line_format
            .replace("{label}", label)
            .replace("{index}", &(position + 1).to_string());
        prompt.push_str(&line);
    }
    prompt.push_str(&template.instruction);
    Ok(prompt)
}

/// Everything a model may consult for one prediction. Remote models read
/// only `text`; mock models read the structured fields, which is what lets
/// them behave as scripted agents instead of parsing their own prompt.
pub struct PromptRequest<'a> {
    pub text: &'a str,
    pub sample: &'a McqaSample,
    pub arrangement: &'a Arrangement,
    pub catalog: &'a OptionCatalog,
    pub scores: Option<&'a OptionScores>,
}

/// A chat model producing one completion per request.
pub trait ChatModel: Send + Sync {
    fn id(&self) -> &str;

    /// Completion text for one prompt.
    fn predict(&self, request: &PromptRequest) -> Result<String, InferenceError>;

    /// True when outputs are a pure function of (inputs, seed). Latency is
    /// recorded as 0 for such models so run artifacts stay byte-stable.
    fn deterministic(&self) -> bool {
        false
    }
}

/// Declarative model description, as written in run configs. Decoding
/// settings are not part of the spec because they are pinned: temperature
/// [`TEMPERATURE`], sampling off, for every kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatModelSpec {
    pub model_id: String,
    #[serde(flatten)]
    pub kind: ChatModelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChatModelKind {
    Remote {
        endpoint: String,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_max_output_tokens")]
        max_output_tokens: u32,
    },
    FirstPositionMock,
    PositionalDecayMock { base: f64, decay: f64, seed: crate::seed::Seed },
    SimilarityOracleMock,
}

fn default_max_output_tokens() -> u32 {
    32
}

impl ChatModelSpec {
    pub fn is_mock(&self) -> bool {
        !matches!(self.kind, ChatModelKind::Remote { .. })
    }

    /// Whether this model consults similarity scores on each request.
    pub fn needs_scores(&self) -> bool {
        matches!(self.kind, ChatModelKind::SimilarityOracleMock)
    }
}

/// Instantiate the model a spec describes. `transport` applies to remote
/// kinds only.
pub fn build_model(
    spec: &ChatModelSpec,
    transport: &remote::RemoteTransport,
) -> Result<Box<dyn ChatModel>, InferenceError> {
    match &spec.kind {
        ChatModelKind::Remote {
            endpoint,
            api_key_env,
            max_output_tokens,
        } => {
            let config = remote::RemoteChatConfig {
                endpoint: endpoint.clone(),
                model: spec.model_id.clone(),
                api_key_env: api_key_env.clone(),
                max_output_tokens: *max_output_tokens,
                transport: transport.clone(),
            };
            Ok(Box::new(remote::RemoteChatModel::new(config)?))
        }
        ChatModelKind::FirstPositionMock => {
            Ok(Box::new(mock::FirstPositionMock::new(&spec.model_id)))
        }
        ChatModelKind::PositionalDecayMock { base, decay, seed } => Ok(Box::new(
            mock::PositionalDecayMock::new(&spec.model_id, *base, *decay, *seed)?,
        )),
        ChatModelKind::SimilarityOracleMock => {
            Ok(Box::new(mock::SimilarityOracleMock::new(&spec.model_id)))
        }
    }
}

/// Map a raw completion onto the catalog.
///
/// Cascade: (1) the normalized reply equals a normalized label; (2) exactly
/// one normalized label occurs as a substring of the normalized reply;
/// (3) otherwise None. Multiple substring hits are ambiguous and parse as
/// None rather than guessing.
pub fn parse_answer(raw: &str, catalog: &OptionCatalog) -> Option<usize> {
    let reply = normalize_label(raw);
    if reply.is_empty() {
        return None;
    }
    let normalized: Vec<String> = catalog.labels().iter().map(|l| normalize_label(l)).collect();
    if let Some(index) = normalized.iter().position(|l| *l == reply) {
        return Some(index);
    }
    let mut hits = normalized.iter().enumerate().filter(|(_, l)| reply.contains(l.as_str()));
    match (hits.next(), hits.next()) {
        (Some((index, _)), None) => Some(index),
        _ => None,
    }
}

/// Provenance stamped on every prediction record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionMeta {
    pub model_id: String,
    pub template_hash: String,
}

/// One model call, fully resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub arrangement: Arrangement,
    pub raw_output: String,
    /// Catalog index the reply parsed to; None when unparsable.
    pub parsed: Option<usize>,
    pub correct: bool,
    pub latency_ms: u64,
    pub meta: PredictionMeta,
    /// Present when the provider failed after exhausting retries; such
    /// records count as incorrect and are excluded or included in
    /// denominators per the evaluation failure mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
}

impl PredictionRecord {
    pub fn is_failed(&self) -> bool {
        self.failed.is_some()
    }
}

/// Run one sample end to end: render, predict, parse, judge.
///
/// Provider outages (exhausted retries) become flagged records instead of
/// errors so a long run survives a flaky endpoint; protocol and
/// configuration errors still propagate.
pub fn predict_sample(
    model: &dyn ChatModel,
    template: &PromptTemplate,
    sample: &McqaSample,
    arrangement: &Arrangement,
    catalog: &OptionCatalog,
    scores: Option<&OptionScores>,
) -> Result<PredictionRecord, InferenceError> {
    let text = build_prompt(template, &sample.query, arrangement, catalog)?;
    let request = PromptRequest {
        text: &text,
        sample,
        arrangement,
        catalog,
        scores,
    };
    let meta = PredictionMeta {
        model_id: model.id().to_string(),
        template_hash: template.hash(),
    };
    let started = std::time::Instant::now();
    match model.predict(&request) {
        Ok(raw_output) => {
            let latency_ms = if model.deterministic() {
                0
            } else {
                started.elapsed().as_millis() as u64
            };
            let parsed = parse_answer(&raw_output, catalog);
            Ok(PredictionRecord {
                sample_id: sample.id.clone(),
                arrangement: arrangement.clone(),
                raw_output,
                parsed,
                correct: parsed == Some(sample.target),
                latency_ms,
                meta,
                failed: None,
            })
        }
        Err(InferenceError::ProviderUnavailable { attempts, reason }) => Ok(PredictionRecord {
            sample_id: sample.id.clone(),
            arrangement: arrangement.clone(),
            raw_output: String::new(),
            parsed: None,
            correct: false,
            latency_ms: 0,
            meta,
            failed: Some(format!("provider unavailable after {attempts} attempts: {reason}")),
        }),
        Err(err) => Err(err),
    }
}

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("arrangement of length {arrangement_len} is invalid for {options} options")]
    InvalidArrangement {
        arrangement_len: usize,
        options: usize,
    },
    #[error("similarity oracle model needs option scores for sample {sample_id}")]
    MissingScores { sample_id: String },
    #[error("credential environment variable {env_var} is not set")]
    MissingCredentials { env_var: String },
    #[error("invalid model configuration: {0}")]
    InvalidModelConfig(String),
    #[error("chat provider unavailable after {attempts} attempts: {reason}")]
    ProviderUnavailable { attempts: u32, reason: String },
    #[error("chat provider protocol error: {0}")]
    ProviderProtocol(String),
}
