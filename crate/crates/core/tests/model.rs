mod support;

use proptest::prelude::*;
use support::oracles::metrics_by_definition;
use support::synthetic::{image, TEXTS};
use tlens_core::encoders::{EncoderConfig, Vocabulary};
use tlens_core::model::{derive_receptivity_metrics, HrModel, HrModelConfig, ModelError, WeightsError, WEIGHTS_FILE};

fn small() -> HrModelConfig {
    let enc = EncoderConfig {
        image_size: 16,
        patch_size: 8,
        image_layers: 1,
        text_layers: 1,
        hidden: 16,
        heads: 2,
        embed_dim: 8,
        max_tokens: 12,
        vocab_size: 64,
        ..EncoderConfig::desk()
    };
    HrModelConfig::with_encoder(enc, vec![16, 8, 4, 1])
}

fn model(cfg: HrModelConfig, seed: u64) -> HrModel {
    let vocab = Vocabulary::build(TEXTS, cfg.encoder.vocab_size);
    HrModel::new(cfg, vocab, seed).unwrap()
}

proptest! {
    #[test]
    fn metrics_match_the_definition(ai in 0.0..=1.0f64, b in 0.0..=1.0f64, d in 0.0..=1.0f64) {
        let m = derive_receptivity_metrics(ai, b, d).unwrap();
        let (t, i, o) = metrics_by_definition(ai, b, d);
        prop_assert!((m.trustworthiness - t).abs() < 1e-12);
        prop_assert!((m.impact - i).abs() < 1e-12);
        prop_assert!((m.openness - o).abs() < 1e-12);
        for v in [m.trustworthiness, m.impact, m.openness] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn predictions_satisfy_the_identities(
        seed in 0u64..1000,
        text in "[a-z ]{0,60}",
        with_image in any::<bool>(),
    ) {
        let m = model(small(), seed);
        let img = with_image.then(|| image(16, seed));
        let r = m.predict(&text, img.as_ref()).unwrap();
        let (t, i, o) = metrics_by_definition(r.ai_likelihood, r.belief, r.dissemination);
        prop_assert!((r.trustworthiness - t).abs() < 1e-12);
        prop_assert!((r.impact - i).abs() < 1e-12);
        prop_assert!((r.openness - o).abs() < 1e-12);
        for (_, v) in r.attributes() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}

#[test]
fn loading_into_a_wider_model_names_the_tensor() {
    let dir = tempfile::tempdir().unwrap();
    model(small(), 1).save(dir.path()).unwrap();

    let mut wide = small();
    wide.encoder.hidden = 24;
    let mut target = HrModel::skeleton(wide, model(small(), 1).vocab().clone()).unwrap();
    let err = tlens_core::model::load_weights(&dir.path().join(WEIGHTS_FILE), target.params_mut()).unwrap_err();
    match err {
        WeightsError::Schema { tensor, detail } => {
            assert!(tensor.starts_with("text."), "{tensor}: {detail}");
            assert!(detail.contains("16") && detail.contains("24"), "{detail}");
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn corrupt_weight_file_fails_to_load() {
    let dir = tempfile::tempdir().unwrap();
    model(small(), 1).save(dir.path()).unwrap();
    let path = dir.path().join(WEIGHTS_FILE);
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[1] = b'X';
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(
        HrModel::load(dir.path()),
        Err(ModelError::Weights(WeightsError::Format(_)))
    ));
}

#[test]
fn desk_preset_reports_group_sizes() {
    let m = model(HrModelConfig::desk(), 0);
    let sizes = m.group_sizes();
    assert_eq!(sizes.iter().map(|(_, n)| n).sum::<usize>(), m.params().numel());
    assert!(sizes.iter().all(|(_, n)| *n > 0));
    // sentiment: 64·128 + 128 + 128·64 + 64 + 64 + 1
    assert_eq!(sizes[2], ("sentiment.", 16_641));
}
