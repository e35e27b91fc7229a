//! Deterministic stand-ins for a chat model, used to make positional-bias
//! experiments reproducible without any endpoint.
//!
//! Each mock is a pure function of (request, seed): safe for concurrent
//! use, and a full evaluation run over them is bit-reproducible regardless
//! of worker count.

use rand::Rng;

use crate::inference::{ChatModel, InferenceError, PromptRequest};
use crate::seed::Seed;

/// Extreme primacy: always answers with whatever label is listed first.
pub struct FirstPositionMock {
    id: String,
}

impl FirstPositionMock {
    pub fn new(id: impl Into<String>) -> Self {
        FirstPositionMock { id: id.into() }
    }
}

impl ChatModel for FirstPositionMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn predict(&self, request: &PromptRequest) -> Result<String, InferenceError> {
        let first = request.arrangement.order()[0];
        Ok(request
            .catalog
            .label(first)
            .expect("arrangement validated against catalog")
            .to_string())
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// Positionally biased agent: answers correctly with probability
/// `base * decay^p`, where p is the position the target label appears at
/// (first occurrence); otherwise answers with the first non-target label in
/// the arrangement.
///
/// The coin for each (sample, position) is derived from the seed by
/// content, not draw order, so outcomes are independent of evaluation
/// order and thread count.
pub struct PositionalDecayMock {
    id: String,
    base: f64,
    decay: f64,
    seed: Seed,
}

impl PositionalDecayMock {
    pub fn new(
        id: impl Into<String>,
        base: f64,
        decay: f64,
        seed: Seed,
    ) -> Result<Self, InferenceError> {
        if !(0.0..=1.0).contains(&base) || !(0.0..=1.0).contains(&decay) {
            return Err(InferenceError::InvalidModelConfig(format!(
                "base and decay must lie in [0, 1], got base={base}, decay={decay}"
            )));
        }
        Ok(PositionalDecayMock {
            id: id.into(),
            base,
            decay,
            seed,
        })
    }

    /// P(correct) when the target sits at position `p`.
    pub fn correctness_probability(&self, p: usize) -> f64 {
        self.base * self.decay.powi(p as i32)
    }
}

impl ChatModel for PositionalDecayMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn predict(&self, request: &PromptRequest) -> Result<String, InferenceError> {
        let target = request.sample.target;
        let p = request
            .arrangement
            .position_of(target)
            .expect("valid arrangements list every option");
        let mut rng = self
            .seed
            .derive(&["decay", &request.sample.id, &p.to_string()])
            .rng();
        let u: f64 = rng.random();
        let answer = if u < self.correctness_probability(p) {
            target
        } else {
            *request
                .arrangement
                .order()
                .iter()
                .find(|&&option| option != target)
                .expect("catalogs have at least two options")
        };
        Ok(request
            .catalog
            .label(answer)
            .expect("arrangement validated against catalog")
            .to_string())
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// Ignores position entirely: answers with the label holding the highest
/// supplied similarity score (ties to the lowest index).
pub struct SimilarityOracleMock {
    id: String,
}

impl SimilarityOracleMock {
    pub fn new(id: impl Into<String>) -> Self {
        SimilarityOracleMock { id: id.into() }
    }
}

impl ChatModel for SimilarityOracleMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn predict(&self, request: &PromptRequest) -> Result<String, InferenceError> {
        let scores = request
            .scores
            .ok_or_else(|| InferenceError::MissingScores {
                sample_id: request.sample.id.clone(),
            })?;
        let best = scores
            .scores()
            .iter()
            .enumerate()
            .max_by(|(ai, av), (bi, bv)| av.total_cmp(bv).then(bi.cmp(ai)))
            .map(|(i, _)| i)
            .expect("scores are non-empty");
        Ok(request
            .catalog
            .label(best)
            .expect("scores length equals catalog size")
            .to_string())
    }

    fn deterministic(&self) -> bool {
        true
    }
}
