//! Shared fixtures for the benchmarks.

use fvlab_core::datamodel::{synth_generate, Dataset, SynthConfig};
use fvlab_core::model::{Direction, ModelParams, Objective};

/// Synthetic dataset of `ids` identities with 4 clips of `dim`-d features.
pub fn dataset(ids: usize, dim: usize) -> Dataset {
    synth_generate(&SynthConfig {
        n_identities: ids,
        clips_per_identity: 4,
        latent_dim: 8,
        feature_dim: dim,
        seed: 1,
        ..SynthConfig::default()
    })
    .expect("valid synth config")
}

pub fn model(dim: usize, hidden: usize, objective: Objective) -> ModelParams {
    ModelParams::init(dim, hidden, hidden, objective, Direction::V2F, 2).expect("valid model dims")
}
