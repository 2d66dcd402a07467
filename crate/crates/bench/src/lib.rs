//! Shared fixtures for the benchmarks.

use flake_core::experiment::{party_ids, ExperimentConfig};
use flake_core::masking::{build_mask_context, mask};
use flake_core::{DataMatrix, MaskContext, MaskDims, MaskedMatrix};

pub struct Fixture {
    pub parts: Vec<DataMatrix>,
    pub labels: Vec<i64>,
    pub contexts: Vec<MaskContext>,
    pub masked: Vec<MaskedMatrix>,
}

/// Three parties, 20 features, `total` samples split evenly.
pub fn fixture(total: usize) -> Fixture {
    let config = ExperimentConfig { samples_per_party: total / 3, ..ExperimentConfig::default() };
    let parts = config.party_data().expect("synthetic data");
    let labels = parts.iter().flat_map(|p| p.labels.clone().expect("labelled")).collect();
    let dims = MaskDims::doubled(config.features).expect("valid dims");
    let contexts: Vec<MaskContext> = party_ids(config.parties)
        .into_iter()
        .enumerate()
        .map(|(i, id)| build_mask_context(config.mask_seed(), dims, id, 100 + i as u64).expect("mask context"))
        .collect();
    let masked = parts.iter().zip(&contexts).map(|(p, c)| mask(p, c).expect("mask")).collect();
    Fixture { parts, labels, contexts, masked }
}
