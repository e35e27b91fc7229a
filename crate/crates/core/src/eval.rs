//! Experiment drivers: position sweeps, cumulative accuracy distributions,
//! arrangement-strategy comparisons, top-k coverage, target-position
//! histograms, and option-count bias comparisons.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrangement::Arrangement;
use crate::dataset::McqaDataset;
use crate::inference::{predict_sample, ChatModel, InferenceError, PredictionRecord, PromptTemplate};
use crate::reorder::{place_target_at, PositionProfile, ReorderError, Strategy};
use crate::similarity::OptionScores;

/// How aggregate metrics treat samples whose provider calls exhausted all
/// retries. Parse failures are unaffected: an answer that came back but did
/// not match any label always counts as incorrect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    /// Drop failed samples from denominators and report them separately.
    #[default]
    ExcludeFailed,
    /// Count failed samples as incorrect answers.
    CountAsIncorrect,
}

/// Accuracy at each swept target position for one (model, dataset) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionAccuracyCurve {
    positions: Vec<usize>,
    accuracy: Vec<f64>,
    sample_count: usize,
}

impl PositionAccuracyCurve {
    pub fn new(
        positions: Vec<usize>,
        accuracy: Vec<f64>,
        sample_count: usize,
    ) -> Result<Self, EvalError> {
        if positions.is_empty() || positions.len() != accuracy.len() {
            return Err(EvalError::InvalidCurve);
        }
        if !accuracy.iter().all(|a| a.is_finite() && (0.0..=1.0).contains(a)) {
            return Err(EvalError::InvalidCurve);
        }
        Ok(PositionAccuracyCurve { positions, accuracy, sample_count })
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn accuracy(&self) -> &[f64] {
        &self.accuracy
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Running share of total accuracy mass up to each swept position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeCurve {
    /// C(p) = sum of accuracy through p / total accuracy; all zeros when
    /// degenerate.
    pub cumulative: Vec<f64>,
    /// True when the curve had no accuracy mass at all.
    pub degenerate: bool,
}

/// Everything a position sweep produces.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub curve: PositionAccuracyCurve,
    /// Rows are samples in dataset order, columns the swept positions.
    /// `None` marks a prediction whose provider calls failed outright.
    pub matrix: Vec<Vec<Option<bool>>>,
    /// One record per (sample, position), sample-major.
    pub records: Vec<PredictionRecord>,
}

/// Aggregate outcome of running one arrangement strategy over a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyResult {
    pub model_id: String,
    pub dataset_name: String,
    pub strategy: String,
    /// Correct answers over evaluated samples.
    pub accuracy: f64,
    /// Answers that matched no catalog label, over evaluated samples.
    pub unparsed_rate: f64,
    /// Samples dropped from the denominator (always zero outside
    /// exclude-failed mode).
    pub excluded: usize,
    /// One record per sample, in dataset order. Persisted separately as a
    /// prediction log, not inside summary JSON.
    #[serde(skip)]
    pub records: Vec<PredictionRecord>,
}

/// Fraction of samples whose target sits within the first k list entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub k: usize,
    pub coverage: f64,
}

/// One dataset's share of the option-count comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptionCountBias {
    pub dataset_name: String,
    pub option_count: usize,
    pub curve: PositionAccuracyCurve,
    pub cumulative: CumulativeCurve,
    /// Accuracy mass inside the first 10% of positions; the scalar used to
    /// compare bias intensity across option counts.
    pub first_decile_mass: f64,
}

/// Every stride-th position in 0..n. Full sweeps use stride 1.
pub fn strided_positions(n: usize, stride: usize) -> Result<Vec<usize>, EvalError> {
    if stride == 0 {
        return Err(EvalError::InvalidStride);
    }
    if n == 0 {
        return Err(EvalError::InvalidPositions);
    }
    Ok((0..n).step_by(stride).collect())
}

fn validate_positions(positions: &[usize], n: usize) -> Result<(), EvalError> {
    if positions.is_empty() || !positions.windows(2).all(|w| w[0] < w[1]) {
        return Err(EvalError::InvalidPositions);
    }
    if *positions.last().expect("non-empty") >= n {
        return Err(EvalError::InvalidPositions);
    }
    Ok(())
}

struct SampleSweepRow {
    cells: Vec<Option<bool>>,
    records: Vec<PredictionRecord>,
}

fn sweep_rows(
    model: &dyn ChatModel,
    template: &PromptTemplate,
    dataset: &McqaDataset,
    positions: &[usize],
    keep_records: bool,
) -> Result<Vec<SampleSweepRow>, EvalError> {
    let n = dataset.option_count();
    dataset
        .samples
        .par_iter()
        .map(|sample| {
            let mut cells = Vec::with_capacity(positions.len());
            let mut records = Vec::with_capacity(if keep_records { positions.len() } else { 0 });
            for &p in positions {
                let arrangement = place_target_at(sample, p, n)?;
                let record =
                    predict_sample(model, template, sample, &arrangement, &dataset.catalog, None)?;
                cells.push(if record.is_failed() { None } else { Some(record.correct) });
                if keep_records {
                    records.push(record);
                }
            }
            Ok(SampleSweepRow { cells, records })
        })
        .collect()
}

fn column_accuracy(rows: &[SampleSweepRow], column: usize, mode: FailureMode) -> f64 {
    let correct = rows
        .iter()
        .filter(|r| r.cells[column] == Some(true))
        .count() as u64;
    let denominator = match mode {
        FailureMode::ExcludeFailed => {
            rows.iter().filter(|r| r.cells[column].is_some()).count() as u64
        }
        FailureMode::CountAsIncorrect => rows.len() as u64,
    };
    if denominator == 0 {
        return 0.0;
    }
    correct as f64 / denominator as f64
}

/// Present every sample with its target at each requested position and
/// measure accuracy per position. `positions` defaults to the full 0..N−1.
pub fn position_sweep(
    model: &dyn ChatModel,
    template: &PromptTemplate,
    dataset: &McqaDataset,
    positions: Option<&[usize]>,
    mode: FailureMode,
) -> Result<SweepOutcome, EvalError> {
    let (curve, matrix, records) = sweep_core(model, template, dataset, positions, mode, true)?;
    Ok(SweepOutcome { curve, matrix, records })
}

fn sweep_core(
    model: &dyn ChatModel,
    template: &PromptTemplate,
    dataset: &McqaDataset,
    positions: Option<&[usize]>,
    mode: FailureMode,
    keep_records: bool,
) -> Result<(PositionAccuracyCurve, Vec<Vec<Option<bool>>>, Vec<PredictionRecord>), EvalError> {
    if dataset.samples.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let full: Vec<usize>;
    let positions = match positions {
        Some(p) => p,
        None => {
            full = (0..dataset.option_count()).collect();
            &full
        }
    };
    validate_positions(positions, dataset.option_count())?;

    let mut rows = sweep_rows(model, template, dataset, positions, keep_records)?;
    let accuracy: Vec<f64> = (0..positions.len())
        .map(|j| column_accuracy(&rows, j, mode))
        .collect();
    let curve =
        PositionAccuracyCurve::new(positions.to_vec(), accuracy, dataset.sample_count())?;
    let matrix: Vec<Vec<Option<bool>>> = rows.iter().map(|r| r.cells.clone()).collect();
    let records: Vec<PredictionRecord> =
        rows.iter_mut().flat_map(|r| r.records.drain(..)).collect();
    Ok((curve, matrix, records))
}

/// Share of total accuracy mass accumulated through each position. A curve
/// with no mass at all is flagged degenerate and maps to all zeros.
pub fn cumulative_distribution(curve: &PositionAccuracyCurve) -> CumulativeCurve {
    let total: f64 = curve.accuracy().iter().sum();
    if total == 0.0 {
        return CumulativeCurve {
            cumulative: vec![0.0; curve.len()],
            degenerate: true,
        };
    }
    let mut running = 0.0;
    let cumulative = curve
        .accuracy()
        .iter()
        .map(|a| {
            running += a;
            running / total
        })
        .collect();
    CumulativeCurve { cumulative, degenerate: false }
}

/// Accuracy mass inside the first 10% of positions (at least one position).
pub fn first_decile_mass(cumulative: &CumulativeCurve) -> f64 {
    if cumulative.degenerate || cumulative.cumulative.is_empty() {
        return 0.0;
    }
    let n = cumulative.cumulative.len();
    let k = n.div_ceil(10).max(1);
    cumulative.cumulative[k - 1]
}

fn scores_for_sample<'a>(
    scores: Option<&'a [OptionScores]>,
    dataset: &McqaDataset,
    index: usize,
) -> Result<Option<&'a OptionScores>, EvalError> {
    let Some(all) = scores else { return Ok(None) };
    let entry = &all[index];
    let expected = &dataset.samples[index].id;
    if entry.sample_id() != expected {
        return Err(EvalError::ScoresMisaligned {
            index,
            expected: expected.clone(),
            actual: entry.sample_id().to_string(),
        });
    }
    Ok(Some(entry))
}

/// Run one arrangement strategy across the dataset and aggregate accuracy.
/// `scores` must align with `dataset.samples` when the strategy is
/// score-driven; pass the output of the dataset scoring routine unchanged.
pub fn evaluate_strategy(
    model: &dyn ChatModel,
    template: &PromptTemplate,
    dataset: &McqaDataset,
    strategy: &Strategy,
    scores: Option<&[OptionScores]>,
    mode: FailureMode,
) -> Result<StrategyResult, EvalError> {
    if dataset.samples.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    if let Some(all) = scores {
        if all.len() != dataset.samples.len() {
            return Err(EvalError::LengthMismatch {
                expected: dataset.samples.len(),
                actual: all.len(),
            });
        }
    }
    let n = dataset.option_count();
    let records: Vec<PredictionRecord> = dataset
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, sample)| {
            let per_sample = scores_for_sample(scores, dataset, i)?;
            let arrangement = apply_strategy_checked(strategy, sample, n, per_sample)?;
            predict_sample(model, template, sample, &arrangement, &dataset.catalog, per_sample)
                .map_err(EvalError::from)
        })
        .collect::<Result<_, EvalError>>()?;

    let failed = records.iter().filter(|r| r.is_failed()).count();
    let denominator = match mode {
        FailureMode::ExcludeFailed => records.len() - failed,
        FailureMode::CountAsIncorrect => records.len(),
    };
    let correct = records.iter().filter(|r| r.correct).count();
    let unparsed = records
        .iter()
        .filter(|r| !r.is_failed() && r.parsed.is_none())
        .count();
    let ratio = |count: usize| {
        if denominator == 0 {
            0.0
        } else {
            count as f64 / denominator as f64
        }
    };
    Ok(StrategyResult {
        model_id: model.id().to_string(),
        dataset_name: dataset.name.clone(),
        strategy: strategy.kind().to_string(),
        accuracy: ratio(correct),
        unparsed_rate: ratio(unparsed),
        excluded: match mode {
            FailureMode::ExcludeFailed => failed,
            FailureMode::CountAsIncorrect => 0,
        },
        records,
    })
}

fn apply_strategy_checked(
    strategy: &Strategy,
    sample: &crate::dataset::McqaSample,
    n: usize,
    scores: Option<&OptionScores>,
) -> Result<Arrangement, EvalError> {
    crate::reorder::apply_strategy(strategy, sample, n, scores).map_err(EvalError::from)
}

fn target_positions(
    dataset: &McqaDataset,
    arrangements: &[Arrangement],
) -> Result<Vec<usize>, EvalError> {
    if arrangements.len() != dataset.samples.len() {
        return Err(EvalError::LengthMismatch {
            expected: dataset.samples.len(),
            actual: arrangements.len(),
        });
    }
    dataset
        .samples
        .iter()
        .zip(arrangements)
        .map(|(sample, arrangement)| {
            arrangement
                .position_of(sample.target)
                .ok_or_else(|| EvalError::TargetMissing { sample_id: sample.id.clone() })
        })
        .collect()
}

/// For each k, the fraction of samples whose target appears within the
/// first k entries of its arrangement. Duplicated arrangements count the
/// target's first occurrence.
pub fn topk_coverage(
    dataset: &McqaDataset,
    arrangements: &[Arrangement],
    k_values: &[usize],
) -> Result<Vec<CoverageResult>, EvalError> {
    if let Some(&k) = k_values.iter().find(|&&k| k == 0) {
        return Err(EvalError::InvalidK { k });
    }
    let positions = target_positions(dataset, arrangements)?;
    let total = positions.len();
    Ok(k_values
        .iter()
        .map(|&k| {
            let hits = positions.iter().filter(|&&p| p < k).count();
            CoverageResult {
                k,
                coverage: if total == 0 { 0.0 } else { hits as f64 / total as f64 },
            }
        })
        .collect())
}

/// Count of samples whose target lands at each list position. Sums to the
/// sample count; sized to the longest arrangement.
pub fn target_position_histogram(
    dataset: &McqaDataset,
    arrangements: &[Arrangement],
) -> Result<Vec<u64>, EvalError> {
    let positions = target_positions(dataset, arrangements)?;
    let bins = arrangements.iter().map(Arrangement::len).max().unwrap_or(0);
    let mut histogram = vec![0u64; bins];
    for p in positions {
        histogram[p] += 1;
    }
    Ok(histogram)
}

/// Freeze a sweep's accuracies into a reusable per-position profile.
pub fn bias_profile_from_sweep(
    curve: &PositionAccuracyCurve,
    model_id: &str,
    dataset_name: &str,
) -> Result<PositionProfile, EvalError> {
    PositionProfile::new(model_id, dataset_name, curve.accuracy().to_vec())
        .map_err(EvalError::from)
}

/// Sweep each dataset in full and compare how front-loaded the accuracy
/// mass is. Intended for datasets that differ only in option count.
pub fn compare_option_counts(
    model: &dyn ChatModel,
    template: &PromptTemplate,
    datasets: &[&McqaDataset],
    mode: FailureMode,
) -> Result<Vec<OptionCountBias>, EvalError> {
    if datasets.len() < 2 {
        return Err(EvalError::NeedTwoDatasets { got: datasets.len() });
    }
    datasets
        .iter()
        .map(|dataset| {
            let (curve, _, _) = sweep_core(model, template, dataset, None, mode, false)?;
            let cumulative = cumulative_distribution(&curve);
            let first_decile_mass = first_decile_mass(&cumulative);
            Ok(OptionCountBias {
                dataset_name: dataset.name.clone(),
                option_count: dataset.option_count(),
                curve,
                cumulative,
                first_decile_mass,
            })
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset has no samples")]
    EmptyDataset,
    #[error("curve positions and accuracies must be non-empty, aligned, within [0, 1]")]
    InvalidCurve,
    #[error("swept positions must be strictly increasing and within 0..N")]
    InvalidPositions,
    #[error("stride must be at least 1")]
    InvalidStride,
    #[error("k values must be at least 1, got {k}")]
    InvalidK { k: usize },
    #[error("expected {expected} entries aligned with the dataset, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("scores at index {index} are for sample {actual}, expected {expected}")]
    ScoresMisaligned {
        index: usize,
        expected: String,
        actual: String,
    },
    #[error("target for sample {sample_id} missing from its arrangement")]
    TargetMissing { sample_id: String },
    #[error("option-count comparison needs at least 2 datasets, got {got}")]
    NeedTwoDatasets { got: usize },
    #[error(transparent)]
    Reorder(#[from] ReorderError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{McqaSample, OptionCatalog};
    use crate::embedding::hash::HashEmbedder;
    use crate::inference::mock::{FirstPositionMock, PositionalDecayMock};
    use crate::inference::{build_prompt, parse_answer, PromptRequest};
    use crate::ingest::dataset_stats;
    use crate::seed::Seed;
    use crate::similarity::{score_dataset, ScoreSettings, SimilarityMetric};

    fn catalog(n: usize) -> OptionCatalog {
        OptionCatalog::new((0..n).map(|i| format!("intent_{i:03}")).collect()).unwrap()
    }

    fn dataset(n: usize, samples: usize) -> McqaDataset {
        let catalog = catalog(n);
        let samples = (0..samples)
            .map(|s| McqaSample {
                id: format!("s{s}"),
                query: format!("query about intent_{:03}", s % n),
                target: s % n,
            })
            .collect();
        McqaDataset::new("synthetic", catalog, samples).unwrap()
    }

    /// Always answers sample "s0" correctly; other samples only when their
    /// target is listed first.
    struct SelectiveMock;

    impl ChatModel for SelectiveMock {
        fn id(&self) -> &str {
            "selective-mock"
        }

        fn predict(&self, request: &PromptRequest<'_>) -> Result<String, InferenceError> {
            let target = request.sample.target;
            let first = request.arrangement.position_of(target) == Some(0);
            if request.sample.id == "s0" || first {
                Ok(request.catalog.label(target).unwrap().to_string())
            } else {
                let wrong = (0..request.catalog.len()).find(|&i| i != target).unwrap();
                Ok(request.catalog.label(wrong).unwrap().to_string())
            }
        }

        fn deterministic(&self) -> bool {
            true
        }
    }

    /// Fails outright for chosen sample ids, answers first-listed otherwise.
    struct OutageMock {
        down: Vec<String>,
    }

    impl ChatModel for OutageMock {
        fn id(&self) -> &str {
            "outage-mock"
        }

        fn predict(&self, request: &PromptRequest<'_>) -> Result<String, InferenceError> {
            if self.down.contains(&request.sample.id) {
                return Err(InferenceError::ProviderUnavailable {
                    attempts: 3,
                    reason: "connection refused".into(),
                });
            }
            let first = request.arrangement.order()[0];
            Ok(request.catalog.label(first).unwrap().to_string())
        }

        fn deterministic(&self) -> bool {
            true
        }
    }

    #[test]
    fn first_position_mock_sweep_is_a_step_function() {
        let dataset = dataset(4, 6);
        let model = FirstPositionMock::new("fp");
        let outcome = position_sweep(
            &model,
            &PromptTemplate::default(),
            &dataset,
            None,
            FailureMode::default(),
        )
        .unwrap();
        assert_eq!(outcome.curve.positions(), &[0, 1, 2, 3]);
        assert_eq!(outcome.curve.accuracy(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(outcome.curve.sample_count(), 6);
        assert_eq!(outcome.records.len(), 24);
        // Sample-major record order: first N records belong to sample 0.
        assert!(outcome.records[..4].iter().all(|r| r.sample_id == "s0"));
    }

    #[test]
    fn selective_mock_halves_accuracy_beyond_position_zero() {
        // Two samples; one answered everywhere, one only at p = 0.
        let dataset = dataset(3, 2);
        let outcome = position_sweep(
            &SelectiveMock,
            &PromptTemplate::default(),
            &dataset,
            None,
            FailureMode::default(),
        )
        .unwrap();
        assert_eq!(outcome.curve.accuracy(), &[1.0, 0.5, 0.5]);
        assert_eq!(
            outcome.matrix,
            vec![
                vec![Some(true), Some(true), Some(true)],
                vec![Some(true), Some(false), Some(false)],
            ]
        );
    }

    #[test]
    fn decay_sweep_tracks_the_configured_probability_curve() {
        let dataset = dataset(10, 500);
        let model = PositionalDecayMock::new("decay", 0.9, 0.8, Seed(7)).unwrap();
        let outcome = position_sweep(
            &model,
            &PromptTemplate::default(),
            &dataset,
            None,
            FailureMode::default(),
        )
        .unwrap();
        for (p, &measured) in outcome.curve.accuracy().iter().enumerate() {
            let expected = 0.9 * 0.8f64.powi(p as i32);
            assert!(
                (measured - expected).abs() <= 0.06,
                "p={p}: measured {measured}, expected {expected}"
            );
        }
    }

    #[test]
    fn sweep_matches_independent_brute_force_exactly() {
        // Literal re-implementation of the sweep as a plain loop nest.
        let dataset = dataset(5, 8);
        let template = PromptTemplate::default();
        let model = PositionalDecayMock::new("decay", 0.7, 0.6, Seed(41)).unwrap();
        let n = dataset.option_count();

        let mut brute = Vec::new();
        for p in 0..n {
            let mut hits = 0u64;
            for sample in &dataset.samples {
                let mut order: Vec<usize> =
                    (0..n).filter(|&i| i != sample.target).collect();
                order.insert(p, sample.target);
                let arrangement = Arrangement::permutation(order, n).unwrap();
                let text =
                    build_prompt(&template, &sample.query, &arrangement, &dataset.catalog)
                        .unwrap();
                let raw = model
                    .predict(&PromptRequest {
                        text: &text,
                        sample,
                        arrangement: &arrangement,
                        catalog: &dataset.catalog,
                        scores: None,
                    })
                    .unwrap();
                if parse_answer(&raw, &dataset.catalog) == Some(sample.target) {
                    hits += 1;
                }
            }
            brute.push(hits as f64 / dataset.sample_count() as f64);
        }

        let outcome = position_sweep(&model, &template, &dataset, None, FailureMode::default())
            .unwrap();
        assert_eq!(outcome.curve.accuracy(), brute.as_slice());
    }

    #[test]
    fn strided_positions_subsample_the_sweep() {
        assert_eq!(strided_positions(10, 2).unwrap(), vec![0, 2, 4, 6, 8]);
        assert_eq!(strided_positions(3, 1).unwrap(), vec![0, 1, 2]);
        assert!(matches!(strided_positions(10, 0), Err(EvalError::InvalidStride)));

        let dataset = dataset(10, 4);
        let positions = strided_positions(10, 2).unwrap();
        let outcome = position_sweep(
            &FirstPositionMock::new("fp"),
            &PromptTemplate::default(),
            &dataset,
            Some(&positions),
            FailureMode::default(),
        )
        .unwrap();
        assert_eq!(outcome.curve.positions(), positions.as_slice());
        assert_eq!(outcome.curve.len(), 5);
        assert_eq!(outcome.matrix[0].len(), 5);
    }

    #[test]
    fn sweep_rejects_bad_position_lists() {
        let dataset = dataset(4, 2);
        let model = FirstPositionMock::new("fp");
        let template = PromptTemplate::default();
        for bad in [vec![], vec![2, 1], vec![0, 0], vec![0, 4]] {
            let err = position_sweep(&model, &template, &dataset, Some(&bad), FailureMode::default())
                .unwrap_err();
            assert!(matches!(err, EvalError::InvalidPositions), "{bad:?}");
        }
    }

    #[test]
    fn cumulative_distribution_matches_hand_computed_values() {
        let curve = |a: Vec<f64>| {
            PositionAccuracyCurve::new((0..a.len()).collect(), a, 10).unwrap()
        };

        let all_front = cumulative_distribution(&curve(vec![1.0, 0.0, 0.0]));
        assert_eq!(all_front.cumulative, vec![1.0, 1.0, 1.0]);
        assert!(!all_front.degenerate);

        let spread = cumulative_distribution(&curve(vec![0.5, 0.25, 0.25]));
        assert_eq!(spread.cumulative, vec![0.5, 0.75, 1.0]);

        let empty = cumulative_distribution(&curve(vec![0.0, 0.0]));
        assert!(empty.degenerate);
        assert_eq!(empty.cumulative, vec![0.0, 0.0]);
    }

    #[test]
    fn cumulative_is_monotone_and_ends_at_one() {
        let curve = PositionAccuracyCurve::new(
            (0..6).collect(),
            vec![0.31, 0.07, 0.19, 0.0, 0.11, 0.02],
            50,
        )
        .unwrap();
        let c = cumulative_distribution(&curve);
        assert!(c.cumulative.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*c.cumulative.last().unwrap(), 1.0);
    }

    #[test]
    fn oracle_strategy_is_perfect_for_the_first_position_mock() {
        let dataset = dataset(6, 9);
        let model = FirstPositionMock::new("fp");
        let template = PromptTemplate::default();
        let oracle = evaluate_strategy(
            &model,
            &template,
            &dataset,
            &Strategy::Oracle,
            None,
            FailureMode::default(),
        )
        .unwrap();
        assert_eq!(oracle.accuracy, 1.0);
        assert_eq!(oracle.unparsed_rate, 0.0);
        assert_eq!(oracle.strategy, "oracle");
        assert_eq!(oracle.records.len(), 9);

        // No other strategy can beat it.
        let provider = HashEmbedder::token_mode(Seed(3), 16);
        let scores =
            score_dataset(&dataset, &provider, SimilarityMetric::TokenMeanCosine, ScoreSettings::default())
                .unwrap();
        for strategy in [
            Strategy::NoSort,
            Strategy::Descending,
            Strategy::Ascending,
            Strategy::Random { seed: Seed(11) },
        ] {
            let result = evaluate_strategy(
                &model,
                &template,
                &dataset,
                &strategy,
                Some(&scores),
                FailureMode::default(),
            )
            .unwrap();
            assert!(result.accuracy <= oracle.accuracy, "{}", strategy.kind());
        }
    }

    #[test]
    fn descending_accuracy_equals_top1_coverage_for_first_position_mock() {
        // Both reduce to "the score argmax is the target".
        let dataset = dataset(6, 24);
        let provider = HashEmbedder::token_mode(Seed(5), 16);
        let scores =
            score_dataset(&dataset, &provider, SimilarityMetric::TokenMeanCosine, ScoreSettings::default())
                .unwrap();
        let result = evaluate_strategy(
            &FirstPositionMock::new("fp"),
            &PromptTemplate::default(),
            &dataset,
            &Strategy::Descending,
            Some(&scores),
            FailureMode::default(),
        )
        .unwrap();

        let arrangements: Vec<Arrangement> = dataset
            .samples
            .iter()
            .zip(&scores)
            .map(|(sample, s)| {
                crate::reorder::apply_strategy(
                    &Strategy::Descending,
                    sample,
                    dataset.option_count(),
                    Some(s),
                )
                .unwrap()
            })
            .collect();
        let coverage = topk_coverage(&dataset, &arrangements, &[1]).unwrap();
        assert_eq!(result.accuracy, coverage[0].coverage);
    }

    #[test]
    fn strategy_evaluation_matches_the_matching_sweep_column() {
        let dataset = dataset(6, 8);
        let template = PromptTemplate::default();
        let model = PositionalDecayMock::new("decay", 0.8, 0.7, Seed(13)).unwrap();
        let outcome =
            position_sweep(&model, &template, &dataset, None, FailureMode::default()).unwrap();
        for p in 0..dataset.option_count() {
            let result = evaluate_strategy(
                &model,
                &template,
                &dataset,
                &Strategy::PlaceTarget { position: p },
                None,
                FailureMode::default(),
            )
            .unwrap();
            assert_eq!(result.accuracy, outcome.curve.accuracy()[p], "position {p}");
            let column: Vec<bool> = outcome.matrix.iter().map(|row| row[p].unwrap()).collect();
            let from_strategy: Vec<bool> = result.records.iter().map(|r| r.correct).collect();
            assert_eq!(from_strategy, column, "position {p}");
        }
    }

    #[test]
    fn failure_modes_change_only_the_denominator() {
        let dataset = dataset(3, 4);
        let model = OutageMock { down: vec!["s2".into()] };
        let template = PromptTemplate::default();

        let excluded = evaluate_strategy(
            &model,
            &template,
            &dataset,
            &Strategy::Oracle,
            None,
            FailureMode::ExcludeFailed,
        )
        .unwrap();
        // Oracle puts the target first and the mock answers first-listed:
        // every surviving sample is correct.
        assert_eq!(excluded.accuracy, 1.0);
        assert_eq!(excluded.excluded, 1);

        let strict = evaluate_strategy(
            &model,
            &template,
            &dataset,
            &Strategy::Oracle,
            None,
            FailureMode::CountAsIncorrect,
        )
        .unwrap();
        assert_eq!(strict.accuracy, 0.75);
        assert_eq!(strict.excluded, 0);

        let sweep = position_sweep(&model, &template, &dataset, None, FailureMode::ExcludeFailed)
            .unwrap();
        assert_eq!(sweep.matrix[2], vec![None, None, None]);
        assert_eq!(sweep.curve.accuracy()[0], 1.0);
        let strict_sweep =
            position_sweep(&model, &template, &dataset, None, FailureMode::CountAsIncorrect)
                .unwrap();
        assert_eq!(strict_sweep.curve.accuracy()[0], 0.75);
    }

    #[test]
    fn misaligned_scores_are_rejected() {
        let dataset = dataset(4, 3);
        let provider = HashEmbedder::token_mode(Seed(9), 8);
        let mut scores =
            score_dataset(&dataset, &provider, SimilarityMetric::TokenMeanCosine, ScoreSettings::default())
                .unwrap();
        scores.swap(0, 2);
        let err = evaluate_strategy(
            &FirstPositionMock::new("fp"),
            &PromptTemplate::default(),
            &dataset,
            &Strategy::Descending,
            Some(&scores),
            FailureMode::default(),
        )
        .unwrap_err();
        assert!(matches!(err, EvalError::ScoresMisaligned { index: 0, .. }));

        scores.swap(0, 2);
        scores.truncate(2);
        let err = evaluate_strategy(
            &FirstPositionMock::new("fp"),
            &PromptTemplate::default(),
            &dataset,
            &Strategy::Descending,
            Some(&scores),
            FailureMode::default(),
        )
        .unwrap_err();
        assert!(matches!(err, EvalError::LengthMismatch { expected: 3, actual: 2 }));
    }

    fn oracle_arrangements(dataset: &McqaDataset) -> Vec<Arrangement> {
        dataset
            .samples
            .iter()
            .map(|s| crate::reorder::oracle_order(s, dataset.option_count()).unwrap())
            .collect()
    }

    #[test]
    fn coverage_of_oracle_and_full_k_is_total() {
        let dataset = dataset(7, 5);
        let oracle = oracle_arrangements(&dataset);
        let results = topk_coverage(&dataset, &oracle, &[1, 7]).unwrap();
        assert_eq!(results[0], CoverageResult { k: 1, coverage: 1.0 });
        assert_eq!(results[1], CoverageResult { k: 7, coverage: 1.0 });

        // Any permutation covers everything at k = N.
        let shuffled: Vec<Arrangement> = dataset
            .samples
            .iter()
            .map(|s| {
                crate::reorder::apply_strategy(
                    &Strategy::Random { seed: Seed(2) },
                    s,
                    7,
                    None,
                )
                .unwrap()
            })
            .collect();
        let results = topk_coverage(&dataset, &shuffled, &[7]).unwrap();
        assert_eq!(results[0].coverage, 1.0);
    }

    /// Four samples arranged so their targets land at fixed positions.
    fn placed_fixture(positions: &[usize], n: usize) -> (McqaDataset, Vec<Arrangement>) {
        let catalog = catalog(n);
        let samples: Vec<McqaSample> = (0..positions.len())
            .map(|s| McqaSample {
                id: format!("s{s}"),
                query: "q".into(),
                target: s % n,
            })
            .collect();
        let dataset = McqaDataset::new("placed", catalog, samples).unwrap();
        let arrangements = dataset
            .samples
            .iter()
            .zip(positions)
            .map(|(sample, &p)| place_target_at(sample, p, n).unwrap())
            .collect();
        (dataset, arrangements)
    }

    #[test]
    fn coverage_counts_fixture_positions() {
        let (dataset, arrangements) = placed_fixture(&[0, 3, 9, 12], 13);
        let results = topk_coverage(&dataset, &arrangements, &[10]).unwrap();
        assert_eq!(results[0].coverage, 0.75);
        assert!(matches!(
            topk_coverage(&dataset, &arrangements, &[0]),
            Err(EvalError::InvalidK { k: 0 })
        ));
    }

    #[test]
    fn coverage_is_monotone_in_k() {
        let dataset = dataset(9, 30);
        for seed in 0..20u64 {
            let arrangements: Vec<Arrangement> = dataset
                .samples
                .iter()
                .map(|s| {
                    crate::reorder::apply_strategy(
                        &Strategy::Random { seed: Seed(seed) },
                        s,
                        9,
                        None,
                    )
                    .unwrap()
                })
                .collect();
            let ks: Vec<usize> = (1..=9).collect();
            let results = topk_coverage(&dataset, &arrangements, &ks).unwrap();
            assert!(
                results.windows(2).all(|w| w[0].coverage <= w[1].coverage),
                "seed {seed}"
            );
            assert_eq!(results.last().unwrap().coverage, 1.0);
        }
    }

    #[test]
    fn coverage_uses_first_occurrence_in_duplicated_arrangements() {
        let dataset = dataset(4, 4);
        let provider = HashEmbedder::token_mode(Seed(21), 8);
        let scores =
            score_dataset(&dataset, &provider, SimilarityMetric::TokenMeanCosine, ScoreSettings::default())
                .unwrap();
        let duplicated: Vec<Arrangement> = dataset
            .samples
            .iter()
            .zip(&scores)
            .map(|(sample, s)| {
                crate::reorder::apply_strategy(&Strategy::DescAsc, sample, 4, Some(s)).unwrap()
            })
            .collect();
        // Every option appears in the descending half, so full coverage at
        // k = N even though arrangements are 2N long.
        let results = topk_coverage(&dataset, &duplicated, &[4]).unwrap();
        assert_eq!(results[0].coverage, 1.0);
    }

    #[test]
    fn histogram_piles_oracle_mass_on_position_zero() {
        let dataset = dataset(6, 5);
        let histogram =
            target_position_histogram(&dataset, &oracle_arrangements(&dataset)).unwrap();
        assert_eq!(histogram, vec![5, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn identity_histogram_matches_dataset_statistics() {
        let dataset = dataset(5, 13);
        let identity: Vec<Arrangement> =
            (0..13).map(|_| Arrangement::identity(5)).collect();
        let histogram = target_position_histogram(&dataset, &identity).unwrap();
        let stats = dataset_stats(&dataset);
        let expected: Vec<u64> =
            stats.target_histogram.iter().map(|&c| c as u64).collect();
        assert_eq!(histogram, expected);
        assert_eq!(histogram.iter().sum::<u64>(), 13);
    }

    #[test]
    fn histogram_counts_fixture_positions() {
        let (dataset, arrangements) = placed_fixture(&[0, 3, 9, 12], 13);
        let histogram = target_position_histogram(&dataset, &arrangements).unwrap();
        let mut expected = vec![0u64; 13];
        for p in [0, 3, 9, 12] {
            expected[p] = 1;
        }
        assert_eq!(histogram, expected);
    }

    #[test]
    fn histogram_rejects_mismatched_arrangement_counts() {
        let dataset = dataset(5, 3);
        let arrangements = vec![Arrangement::identity(5); 2];
        assert!(matches!(
            target_position_histogram(&dataset, &arrangements),
            Err(EvalError::LengthMismatch { expected: 3, actual: 2 })
        ));
    }

    #[test]
    fn sweep_profile_copies_accuracies_with_provenance() {
        let curve =
            PositionAccuracyCurve::new(vec![0, 1, 2], vec![1.0, 0.0, 0.0], 20).unwrap();
        let profile = bias_profile_from_sweep(&curve, "model-x", "set-y").unwrap();
        assert_eq!(profile.accuracy_by_position(), &[1.0, 0.0, 0.0]);
        assert_eq!(profile.model_id, "model-x");
        assert_eq!(profile.dataset_name, "set-y");

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profile.json");
        profile.to_json_file(&path).unwrap();
        let back = PositionProfile::from_json_file(&path).unwrap();
        assert_eq!(back, profile);
    }

    #[test]
    fn decreasing_sweep_profile_reproduces_descending_sort() {
        let curve = PositionAccuracyCurve::new(
            vec![0, 1, 2, 3],
            vec![0.9, 0.6, 0.3, 0.1],
            10,
        )
        .unwrap();
        let profile = bias_profile_from_sweep(&curve, "m", "d").unwrap();
        let scores = [0.4, 0.8, 0.1, 0.6];
        let via_profile = crate::reorder::bias_profile_order(&scores, &profile).unwrap();
        let via_sort = crate::reorder::sort_descending(&scores).unwrap();
        assert_eq!(via_profile.order(), via_sort.order());
    }

    #[test]
    fn option_count_comparison_needs_two_datasets() {
        let one = dataset(4, 3);
        let err = compare_option_counts(
            &FirstPositionMock::new("fp"),
            &PromptTemplate::default(),
            &[&one],
            FailureMode::default(),
        )
        .unwrap_err();
        assert!(matches!(err, EvalError::NeedTwoDatasets { got: 1 }));
    }

    #[test]
    fn duplicated_datasets_compare_identically() {
        let set = dataset(6, 10);
        let model = PositionalDecayMock::new("decay", 0.9, 0.7, Seed(17)).unwrap();
        let results = compare_option_counts(
            &model,
            &PromptTemplate::default(),
            &[&set, &set],
            FailureMode::default(),
        )
        .unwrap();
        assert_eq!(results.len(), 2);
        assert_eq!(results[0].curve, results[1].curve);
        assert_eq!(results[0].cumulative, results[1].cumulative);
        assert_eq!(results[0].first_decile_mass, results[1].first_decile_mass);
    }

    #[test]
    fn larger_catalogs_concentrate_more_mass_up_front() {
        // Same per-position decay; the larger catalog's first decile holds
        // more positions relative to where the mass sits, so its share is
        // higher. Checked against the closed-form geometric mass.
        let small = dataset(10, 300);
        let large = dataset(40, 300);
        let model = PositionalDecayMock::new("decay", 0.9, 0.9, Seed(29)).unwrap();
        let results = compare_option_counts(
            &model,
            &PromptTemplate::default(),
            &[&small, &large],
            FailureMode::default(),
        )
        .unwrap();

        let closed_form = |n: usize| {
            let d: f64 = 0.9;
            let k = n.div_ceil(10).max(1);
            (1.0 - d.powi(k as i32)) / (1.0 - d.powi(n as i32))
        };
        assert!((results[0].first_decile_mass - closed_form(10)).abs() <= 0.05);
        assert!((results[1].first_decile_mass - closed_form(40)).abs() <= 0.05);
        assert!(results[1].first_decile_mass > results[0].first_decile_mass);
    }

    #[test]
    fn first_decile_mass_uses_a_tenth_of_the_positions() {
        let mk = |a: Vec<f64>| {
            let curve =
                PositionAccuracyCurve::new((0..a.len()).collect(), a, 10).unwrap();
            cumulative_distribution(&curve)
        };
        // 20 positions: first decile = first 2.
        let mut acc = vec![0.0; 20];
        acc[0] = 0.3;
        acc[1] = 0.2;
        acc[5] = 0.5;
        assert_eq!(first_decile_mass(&mk(acc)), 0.5);
        // 5 positions: ceil(0.5) = 1 position.
        assert_eq!(first_decile_mass(&mk(vec![0.25, 0.75, 0.0, 0.0, 0.0])), 0.25);
        // Degenerate input carries no mass anywhere.
        assert_eq!(first_decile_mass(&mk(vec![0.0, 0.0])), 0.0);
    }

    #[test]
    fn sweeps_are_reproducible_across_worker_counts() {
        let dataset = dataset(6, 12);
        let model = PositionalDecayMock::new("decay", 0.8, 0.6, Seed(37)).unwrap();
        let template = PromptTemplate::default();
        let baseline =
            position_sweep(&model, &template, &dataset, None, FailureMode::default()).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let serial = pool
            .install(|| position_sweep(&model, &template, &dataset, None, FailureMode::default()))
            .unwrap();
        assert_eq!(baseline.curve, serial.curve);
        assert_eq!(baseline.matrix, serial.matrix);
        assert_eq!(baseline.records.len(), serial.records.len());
        for (a, b) in baseline.records.iter().zip(&serial.records) {
            assert_eq!(a.sample_id, b.sample_id);
            assert_eq!(a.correct, b.correct);
            assert_eq!(a.raw_output, b.raw_output);
        }
    }
}
