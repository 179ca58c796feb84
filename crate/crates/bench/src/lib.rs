//! Shared fixtures for the criterion benchmarks.

use c2t_core::models::{DraftMode, ModelPair};
use c2t_core::pipeline::BUNDLED_SCHEDULE;
use c2t_core::{MlpParams, ModelPairSpec, TokenId};

/// A bundled-style pair at vocabulary `vocab`, seeded.
pub fn fixture_pair(vocab: usize, seed: u64) -> ModelPair {
    let spec = ModelPairSpec {
        vocab,
        order: 2,
        seed,
        concentration_schedule: ModelPairSpec::parse_schedule(BUNDLED_SCHEDULE).expect("bundled schedule"),
        draft_noise: 0.3,
        noise_concentration: 0.1,
        draft_mode: DraftMode::MixturePerturb,
        spread_bins: 0,
    };
    ModelPair::from_spec(&spec, 20, 1000).expect("valid spec")
}

pub fn fixture_classifier(seed: u64) -> MlpParams {
    MlpParams::init_seeded(c2t_core::classifier::DEFAULT_HIDDEN, seed).expect("valid shape")
}

/// Contexts spread over the vocabulary so the row caches see many keys.
pub fn fixture_contexts(vocab: usize, n: usize) -> Vec<Vec<TokenId>> {
    (0..n)
        .map(|i| vec![(i * 7 % vocab) as TokenId, (i * 13 % vocab) as TokenId])
        .collect()
}
