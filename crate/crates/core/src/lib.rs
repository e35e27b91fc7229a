//! Measurement and mitigation of positional bias in multiple-choice
//! question answering.
//!
//! The library covers the full experimental loop: load a dataset (one
//! shared option catalog plus queries), score each option against the
//! query with token-level embedding similarity, reorder the options, ask a
//! chat model (remote endpoint or deterministic mock), and aggregate
//! per-position accuracy curves, strategy comparisons, coverage, and
//! histograms. Every run is reproducible: seeds derive per-purpose RNGs by
//! content, mock models are pure functions, and result files are
//! byte-stable across reruns and worker counts.

pub mod arrangement;
pub mod dataset;
pub mod embedding;
pub mod eval;
pub mod inference;
pub mod ingest;
pub mod net;
pub mod reorder;
pub mod rundir;
pub mod seed;
pub mod similarity;
pub mod synth;

pub use arrangement::{Arrangement, ArrangementError, ArrangementKind};
pub use dataset::{normalize_label, DatasetError, McqaDataset, McqaSample, OptionCatalog};
pub use seed::Seed;
