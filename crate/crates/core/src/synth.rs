//! Synthetic catalogs and datasets with engineerable structure: uniform
//! target placement and a controllable fraction of samples whose query is
//! lexically identical to its target label. A token-hash embedder ranks the
//! target top-1 on exactly that fraction, which makes sort-strategy effects
//! predictable in closed form.

use crate::dataset::{DatasetError, McqaDataset, McqaSample, OptionCatalog};

/// Catalog of `n` distinct single-token labels: intent_000, intent_001, ...
pub fn synthetic_catalog(n: usize) -> Result<OptionCatalog, DatasetError> {
    OptionCatalog::new((0..n).map(|i| format!("intent_{i:03}")).collect())
}

/// Dataset of `samples` queries over a synthetic catalog of `n` labels.
/// Targets cycle through the catalog, so the target histogram is uniform
/// whenever n divides the sample count. Each query names its target label.
pub fn synthetic_dataset(
    name: &str,
    n: usize,
    samples: usize,
) -> Result<McqaDataset, DatasetError> {
    let catalog = synthetic_catalog(n)?;
    let samples = (0..samples)
        .map(|s| {
            let target = s % n;
            McqaSample {
                id: format!("s{s:04}"),
                query: format!("please route this to {}", catalog.label(target).unwrap()),
                target,
            }
        })
        .collect();
    McqaDataset::new(name, catalog, samples)
}

/// Dataset where exactly `top1_percent`% of samples have a query that is the
/// target label verbatim; the rest quote a different label (the next one in
/// catalog order). Under any token-level embedder that maps equal texts to
/// equal vectors, the target is the top-ranked option on exactly the hit
/// samples. The percentage is exact whenever 100 divides the sample count.
pub fn correlated_dataset(
    name: &str,
    n: usize,
    samples: usize,
    top1_percent: u8,
) -> Result<McqaDataset, DatasetError> {
    assert!(top1_percent <= 100, "top1_percent is a percentage");
    assert!(n >= 2, "a decoy label needs at least two options");
    let catalog = synthetic_catalog(n)?;
    let samples = (0..samples)
        .map(|s| {
            let target = s % n;
            let hit = (s % 100) < top1_percent as usize;
            let quoted = if hit { target } else { (target + 1) % n };
            McqaSample {
                id: format!("s{s:04}"),
                query: catalog.label(quoted).unwrap().to_string(),
                target,
            }
        })
        .collect();
    McqaDataset::new(name, catalog, samples)
}
