//! Option reordering: from scores (and optionally a measured positional
//! accuracy profile) to an Arrangement.
//!
//! Every operation is deterministic. All ties break by ascending original
//! index, and the non-target fill order for the oracle and target-placement
//! primitives is ascending original index; stable rules keep runs
//! bit-reproducible and leave option position as the only moving part.
//!
//! The sort primitives order raw values. Metric orientation (distances
//! rank ascending) is applied in [`apply_strategy`], which negates scores
//! from lower-is-more-similar metrics before sorting; negation preserves
//! ties, so tiebreaks are unaffected.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrangement::Arrangement;
use crate::dataset::McqaSample;
use crate::seed::Seed;
use crate::similarity::{OptionScores, Orientation};

/// Measured accuracy per option position for one (model, dataset) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionProfile {
    pub model_id: String,
    pub dataset_name: String,
    accuracy_by_position: Vec<f64>,
}

impl PositionProfile {
    pub fn new(
        model_id: impl Into<String>,
        dataset_name: impl Into<String>,
        accuracy_by_position: Vec<f64>,
    ) -> Result<Self, ReorderError> {
        if accuracy_by_position.is_empty()
            || !accuracy_by_position
                .iter()
                .all(|a| a.is_finite() && (0.0..=1.0).contains(a))
        {
            return Err(ReorderError::InvalidProfile);
        }
        Ok(PositionProfile {
            model_id: model_id.into(),
            dataset_name: dataset_name.into(),
            accuracy_by_position,
        })
    }

    pub fn accuracy_by_position(&self) -> &[f64] {
        &self.accuracy_by_position
    }

    pub fn len(&self) -> usize {
        self.accuracy_by_position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accuracy_by_position.is_empty()
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<(), ReorderError> {
        let path = path.as_ref();
        let mut body = serde_json::to_string_pretty(self).expect("profile serializes");
        body.push('\n');
        std::fs::write(path, body).map_err(|source| ReorderError::ProfileIo {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, ReorderError> {
        let path = path.as_ref();
        let body = std::fs::read_to_string(path).map_err(|source| ReorderError::ProfileIo {
            path: path.display().to_string(),
            source,
        })?;
        let profile: PositionProfile =
            serde_json::from_str(&body).map_err(|source| ReorderError::ProfileParse {
                path: path.display().to_string(),
                source,
            })?;
        // Re-validate; hand-edited files may carry out-of-range values.
        PositionProfile::new(profile.model_id, profile.dataset_name, profile.accuracy_by_position)
    }
}

/// How to arrange options before prompting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Catalog order as-is.
    NoSort,
    /// Most similar option first.
    Descending,
    /// Least similar option first.
    Ascending,
    /// Duplicated list: descending order followed by ascending order.
    DescAsc,
    /// Best options into the positions the model answers best at.
    ModelBias { profile: PositionProfile },
    /// Ground-truth option first.
    Oracle,
    /// Seeded uniform shuffle, varied per sample.
    Random { seed: Seed },
    /// Ground-truth option at a fixed position. Exposed so strategy
    /// evaluation can be cross-checked against one sweep column.
    PlaceTarget { position: usize },
}

impl Strategy {
    pub fn kind(&self) -> &'static str {
        match self {
            Strategy::NoSort => "no_sort",
            Strategy::Descending => "descending",
            Strategy::Ascending => "ascending",
            Strategy::DescAsc => "desc_asc",
            Strategy::ModelBias { .. } => "model_bias",
            Strategy::Oracle => "oracle",
            Strategy::Random { .. } => "random",
            Strategy::PlaceTarget { .. } => "place_target",
        }
    }

    /// Whether [`apply_strategy`] needs similarity scores for this kind.
    pub fn needs_scores(&self) -> bool {
        matches!(
            self,
            Strategy::Descending | Strategy::Ascending | Strategy::DescAsc | Strategy::ModelBias { .. }
        )
    }
}

/// Indices of `values` ranked by value; ties keep ascending index order.
fn ranked_indices(values: &[f64], descending: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let ord = values[a].total_cmp(&values[b]);
        let ord = if descending { ord.reverse() } else { ord };
        ord.then(a.cmp(&b))
    });
    idx
}

/// Highest value first.
pub fn sort_descending(scores: &[f64]) -> Result<Arrangement, ReorderError> {
    if scores.is_empty() {
        return Err(ReorderError::EmptyScores);
    }
    let order = ranked_indices(scores, true);
    Ok(Arrangement::permutation(order, scores.len()).expect("ranking is a permutation"))
}

/// Lowest value first.
pub fn sort_ascending(scores: &[f64]) -> Result<Arrangement, ReorderError> {
    if scores.is_empty() {
        return Err(ReorderError::EmptyScores);
    }
    let order = ranked_indices(scores, false);
    Ok(Arrangement::permutation(order, scores.len()).expect("ranking is a permutation"))
}

/// Duplicated list: descending ranking followed by ascending ranking.
pub fn desc_asc_concat(scores: &[f64]) -> Result<Arrangement, ReorderError> {
    if scores.is_empty() {
        return Err(ReorderError::EmptyScores);
    }
    let mut order = ranked_indices(scores, true);
    order.extend(ranked_indices(scores, false));
    Ok(Arrangement::duplicated(order, scores.len()).expect("two rankings list each index twice"))
}

/// Rank positions by profile accuracy and options by score (both
/// descending, ties by ascending index), then put the k-th best option at
/// the k-th best position.
pub fn bias_profile_order(
    scores: &[f64],
    profile: &PositionProfile,
) -> Result<Arrangement, ReorderError> {
    if scores.is_empty() {
        return Err(ReorderError::EmptyScores);
    }
    if scores.len() != profile.len() {
        return Err(ReorderError::LengthMismatch {
            scores: scores.len(),
            profile: profile.len(),
        });
    }
    let positions = ranked_indices(profile.accuracy_by_position(), true);
    let options = ranked_indices(scores, true);
    let mut order = vec![0; scores.len()];
    for (position, option) in positions.into_iter().zip(options) {
        order[position] = option;
    }
    Ok(Arrangement::permutation(order, scores.len()).expect("paired rankings form a permutation"))
}

/// Target first, remaining options in ascending original index.
pub fn oracle_order(sample: &McqaSample, n: usize) -> Result<Arrangement, ReorderError> {
    place_target_at(sample, 0, n)
}

/// Target at position `p`, remaining options in ascending original index.
pub fn place_target_at(sample: &McqaSample, p: usize, n: usize) -> Result<Arrangement, ReorderError> {
    if sample.target >= n {
        return Err(ReorderError::TargetOutOfRange {
            target: sample.target,
            options: n,
        });
    }
    if p >= n {
        return Err(ReorderError::PositionOutOfRange { position: p, options: n });
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| i != sample.target).collect();
    order.insert(p, sample.target);
    Ok(Arrangement::permutation(order, n).expect("insertion into the rest is a permutation"))
}

/// Scores with orientation folded in: after this, higher always means more
/// similar.
fn oriented_values(scores: &OptionScores) -> Vec<f64> {
    match scores.metric().orientation() {
        Orientation::HigherIsMoreSimilar => scores.scores().to_vec(),
        Orientation::LowerIsMoreSimilar => scores.scores().iter().map(|s| -s).collect(),
    }
}

/// Arrange one sample's options under `strategy`. `n` is the catalog size;
/// score-driven kinds need `scores` for the same sample.
pub fn apply_strategy(
    strategy: &Strategy,
    sample: &McqaSample,
    n: usize,
    scores: Option<&OptionScores>,
) -> Result<Arrangement, ReorderError> {
    if strategy.needs_scores() {
        let scores = scores.ok_or(ReorderError::MissingScores)?;
        if scores.len() != n {
            return Err(ReorderError::LengthMismatch {
                scores: scores.len(),
                profile: n,
            });
        }
        let values = oriented_values(scores);
        return match strategy {
            Strategy::Descending => sort_descending(&values),
            Strategy::Ascending => sort_ascending(&values),
            Strategy::DescAsc => desc_asc_concat(&values),
            Strategy::ModelBias { profile } => bias_profile_order(&values, profile),
            _ => unreachable!("needs_scores covers exactly these kinds"),
        };
    }
    match strategy {
        Strategy::NoSort => Ok(Arrangement::identity(n)),
        Strategy::Oracle => oracle_order(sample, n),
        Strategy::PlaceTarget { position } => place_target_at(sample, *position, n),
        Strategy::Random { seed } => {
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng = seed.derive(&["random-arrangement", &sample.id]).rng();
            order.shuffle(&mut rng);
            Ok(Arrangement::permutation(order, n).expect("shuffle of identity is a permutation"))
        }
        _ => unreachable!("score-driven kinds handled above"),
    }
}

#[derive(Debug, Error)]
pub enum ReorderError {
    #[error("cannot order an empty score vector")]
    EmptyScores,
    #[error("length mismatch: {scores} scores vs {profile} positions")]
    LengthMismatch { scores: usize, profile: usize },
    #[error("target {target} out of range for {options} options")]
    TargetOutOfRange { target: usize, options: usize },
    #[error("position {position} out of range for {options} options")]
    PositionOutOfRange { position: usize, options: usize },
    #[error("strategy needs similarity scores but none were provided")]
    MissingScores,
    #[error("profile accuracies must be non-empty, finite, within [0, 1]")]
    InvalidProfile,
    #[error("profile file {path}: {source}")]
    ProfileIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("profile file {path}: {source}")]
    ProfileParse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}
