//! Small in-memory corpora for training tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tlens_core::encoders::{ImageInput, Vocabulary};
use tlens_core::model::{HrModel, HrModelConfig};
use tlens_core::train::TrainingSet;

pub const TEXTS: [&str; 8] = [
    "breaking storm floods the harbor district tonight",
    "limited offer verify your bank account now",
    "my cat learned to open the fridge",
    "scientists report new battery chemistry breakthrough",
    "free concert tickets for the first hundred fans",
    "city council approves late night bus routes",
    "urgent password reset required click this link",
    "sunset photos from the mountain trail today",
];

/// Targets spread over [0.1, 0.9] with a different ordering per attribute.
pub const TARGETS: [[f64; 3]; 8] = [
    [0.10, 0.80, 0.55],
    [0.90, 0.15, 0.25],
    [0.20, 0.60, 0.85],
    [0.45, 0.70, 0.40],
    [0.65, 0.30, 0.75],
    [0.30, 0.90, 0.15],
    [0.80, 0.10, 0.35],
    [0.55, 0.45, 0.65],
];

pub fn image(size: usize, seed: u64) -> ImageInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let px = (0..size * size * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
    ImageInput::new(size, px).unwrap()
}

pub fn desk_model(seed: u64) -> HrModel {
    let cfg = HrModelConfig::desk();
    let vocab = Vocabulary::build(TEXTS, cfg.encoder.vocab_size);
    HrModel::new(cfg, vocab, seed).unwrap()
}

/// Eight posts with text and image; ids `post0`..`post7`.
pub fn eight_items(model: &HrModel) -> TrainingSet {
    let size = model.config().encoder.image_size;
    TrainingSet {
        ids: (0..8).map(|i| format!("post{i}")).collect(),
        inputs: TEXTS
            .iter()
            .enumerate()
            .map(|(i, t)| model.prepare(t, Some(image(size, 100 + i as u64))))
            .collect(),
        targets: TARGETS.to_vec(),
    }
}
