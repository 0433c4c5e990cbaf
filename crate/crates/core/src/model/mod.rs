//! The human-response network: both encoders, the sentiment-consistency
//! subnetwork, fusion and the three attribute heads.

mod metrics;
pub mod weights;

pub use metrics::{derive_receptivity_metrics, HumanResponse, ReceptivityMetrics};
pub use weights::{load_weights, read_weights_into, save_weights, write_weights, WeightsError};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoders::{EncoderConfig, EncoderError, ImageEncoder, ImageInput, TextEncoder, TokenSequence, Vocabulary};
use crate::nn::{Init, LayerNorm, Linear, ParamBuilder};
use crate::tensor::{ParamStore, Tape, Tensor, TensorError, Var};

pub const CONFIG_FILE: &str = "config.json";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const WEIGHTS_FILE: &str = "weights.hrw";

/// Predicted attributes, in head order.
pub const ATTRIBUTES: [&str; 3] = ["ai_likelihood", "belief", "dissemination"];

/// Parameter name prefixes of the four trainable groups.
pub const GROUPS: [&str; 4] = ["text.", "image.", "sentiment.", "heads."];

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error("{path}: {detail}")]
    Artifact { path: String, detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrModelConfig {
    pub encoder: EncoderConfig,
    pub fusion_dim: usize,
    pub sentiment_hidden: Vec<usize>,
    pub head_widths: Vec<usize>,
    pub dropout_p: f64,
    #[serde(default)]
    pub freeze_encoders: bool,
}

impl Default for HrModelConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl HrModelConfig {
    pub fn paper() -> Self {
        Self::with_encoder(EncoderConfig::paper(), vec![1024, 256, 128, 1])
    }

    pub fn desk() -> Self {
        Self::with_encoder(EncoderConfig::desk(), vec![64, 32, 16, 1])
    }

    /// Fusion width `2 × embed_dim`, sentiment widths `[f, 2f, f]`.
    pub fn with_encoder(encoder: EncoderConfig, head_widths: Vec<usize>) -> Self {
        let f = 2 * encoder.embed_dim;
        Self {
            encoder,
            fusion_dim: f,
            sentiment_hidden: vec![f, 2 * f, f],
            head_widths,
            dropout_p: 0.1,
            freeze_encoders: false,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.encoder.validate()?;
        let f = self.fusion_dim;
        let fail = |m: String| Err(ModelError::Config(m));
        if f != 2 * self.encoder.embed_dim {
            return fail(format!(
                "fusion_dim {f} must equal 2 × embed_dim ({})",
                self.encoder.embed_dim
            ));
        }
        let s = &self.sentiment_hidden;
        if s.len() != 3 || s[0] != f || s[2] != f || s[1] == 0 {
            return fail(format!("sentiment_hidden {s:?} must be [{f}, hidden, {f}]"));
        }
        let h = &self.head_widths;
        if h.len() < 2 || h[0] != f || h.last() != Some(&1) || h.contains(&0) {
            return fail(format!("head_widths {h:?} must run from {f} down to 1"));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return fail(format!("dropout_p {} outside [0, 1)", self.dropout_p));
        }
        Ok(())
    }
}

/// One post ready for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct PostInput {
    pub tokens: TokenSequence,
    pub image: Option<ImageInput>,
}

/// Tape handles produced by [`HrModel::forward`] for a batch of `B` posts.
#[derive(Debug, Clone, Copy)]
pub struct ForwardOutput {
    /// `[B, fusion_dim]` concatenated text and image embeddings.
    pub embedding: Var,
    /// `[B, 1]` sentiment-consistency score in (0, 1).
    pub sentiment: Var,
    /// `[B, 3]` ai_likelihood, belief, dissemination in (0, 1).
    pub attributes: Var,
}

#[derive(Debug, Clone)]
struct Sentiment {
    fc1: Linear,
    fc2: Linear,
    score: Linear,
}

#[derive(Debug, Clone)]
struct Head {
    layers: Vec<Linear>,
}

#[derive(Debug, Clone)]
pub struct HrModel {
    config: HrModelConfig,
    vocab: Vocabulary,
    params: ParamStore,
    text: TextEncoder,
    image: ImageEncoder,
    sentiment: Sentiment,
    fusion_ln: LayerNorm,
    heads: Vec<Head>,
}

impl HrModel {
    pub fn new(config: HrModelConfig, vocab: Vocabulary, seed: u64) -> Result<Self, ModelError> {
        Self::build(config, vocab, Init::seeded(seed))
    }

    /// All-zero parameters with the right names and shapes, for loading.
    pub fn skeleton(config: HrModelConfig, vocab: Vocabulary) -> Result<Self, ModelError> {
        Self::build(config, vocab, Init::Zeros)
    }

    fn build(config: HrModelConfig, vocab: Vocabulary, mut init: Init) -> Result<Self, ModelError> {
        config.validate()?;
        if vocab.len() > config.encoder.vocab_size {
            return Err(ModelError::Config(format!(
                "vocabulary has {} entries but vocab_size is {}",
                vocab.len(),
                config.encoder.vocab_size
            )));
        }
        let mut params = ParamStore::new();
        let mut b = ParamBuilder::new(&mut params, &mut init);
        let enc = &config.encoder;
        let text = TextEncoder::new(&mut b.scope("text"), enc);
        let image = ImageEncoder::new(&mut b.scope("image"), enc);
        let [f, hidden, _] = config.sentiment_hidden[..] else {
            unreachable!("validated")
        };
        let sentiment = {
            let mut s = b.scope("sentiment");
            Sentiment {
                fc1: Linear::new(&mut s, "fc1", f, hidden, true),
                fc2: Linear::new(&mut s, "fc2", hidden, f, true),
                score: Linear::new(&mut s, "score", f, 1, true),
            }
        };
        let fusion_ln = LayerNorm::new(&mut b.scope("heads"), "fusion_ln", f, enc.ln_eps);
        let heads = ATTRIBUTES
            .iter()
            .map(|attr| {
                let mut s = b.scope(&format!("heads.{attr}"));
                let layers = config
                    .head_widths
                    .windows(2)
                    .enumerate()
                    .map(|(i, w)| Linear::new(&mut s, &format!("fc{}", i + 1), w[0], w[1], true))
                    .collect();
                Head { layers }
            })
            .collect();
        if config.freeze_encoders {
            params.set_trainable_prefix("text.", false);
            params.set_trainable_prefix("image.", false);
        }
        Ok(Self {
            config,
            vocab,
            params,
            text,
            image,
            sentiment,
            fusion_ln,
            heads,
        })
    }

    pub fn config(&self) -> &HrModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn text_encoder(&self) -> &TextEncoder {
        &self.text
    }

    pub fn image_encoder(&self) -> &ImageEncoder {
        &self.image
    }

    /// Scalar parameter count per group, in [`GROUPS`] order.
    pub fn group_sizes(&self) -> Vec<(&'static str, usize)> {
        GROUPS
            .iter()
            .map(|g| {
                let n = self
                    .params
                    .iter()
                    .filter(|(_, name, _)| name.starts_with(g))
                    .map(|(_, _, t)| t.len())
                    .sum();
                (*g, n)
            })
            .collect()
    }

    pub fn tokenize(&self, text: &str) -> TokenSequence {
        self.vocab.tokenize(text, self.config.encoder.max_tokens)
    }

    pub fn prepare(&self, text: &str, image: Option<ImageInput>) -> PostInput {
        PostInput {
            tokens: self.tokenize(text),
            image,
        }
    }

    /// Builds the network for a batch on `tape`. `train` enables dropout.
    pub fn forward<'p>(
        &'p self,
        tape: &mut Tape<'p>,
        batch: &[PostInput],
        train: bool,
    ) -> Result<ForwardOutput, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::Domain("empty batch".into()));
        }
        let store = &self.params;
        let p = self.config.dropout_p;
        let mut rows = Vec::with_capacity(batch.len());
        for post in batch {
            let t = self.text.forward(tape, store, &post.tokens)?;
            let i = match &post.image {
                Some(img) => self.image.forward(tape, store, img)?,
                None => tape.constant(Tensor::zeros(&[1, self.config.encoder.embed_dim])),
            };
            rows.push(tape.concat_cols(&[t, i])?);
        }
        let embedding = tape.concat_rows(&rows)?;

        let s = self.sentiment.fc1.forward(tape, store, embedding)?;
        let s = tape.relu(s);
        let s = tape.dropout(s, p, train)?;
        let s = self.sentiment.fc2.forward(tape, store, s)?;
        let score = self.sentiment.score.forward(tape, store, s)?;
        let sentiment = tape.sigmoid(score);

        let fused = tape.add(embedding, s)?;
        let fused = self.fusion_ln.forward(tape, store, fused)?;

        let mut outs = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let mut h = fused;
            let last = head.layers.len() - 1;
            for (i, layer) in head.layers.iter().enumerate() {
                h = layer.forward(tape, store, h)?;
                if i < last {
                    h = tape.relu(h);
                    h = tape.dropout(h, p, train)?;
                }
            }
            outs.push(tape.sigmoid(h));
        }
        let attributes = tape.concat_cols(&outs)?;
        Ok(ForwardOutput {
            embedding,
            sentiment,
            attributes,
        })
    }

    /// Eval-mode prediction for each post.
    pub fn predict_batch(&self, batch: &[PostInput]) -> Result<Vec<HumanResponse>, ModelError> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, batch, false)?;
        let attrs = tape.value(out.attributes);
        let sent = tape.value(out.sentiment);
        (0..batch.len())
            .map(|r| {
                let a = attrs.row(r);
                HumanResponse::from_attributes(a[0], a[1], a[2], sent.data()[r])
            })
            .collect()
    }

    pub fn predict(&self, text: &str, image: Option<&ImageInput>) -> Result<HumanResponse, ModelError> {
        let post = self.prepare(text, image.cloned());
        Ok(self.predict_batch(std::slice::from_ref(&post))?.remove(0))
    }

    /// Writes `config.json`, `vocab.txt` and `weights.hrw` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        let io = |path: &Path, e: &dyn std::fmt::Display| ModelError::Artifact {
            path: path.display().to_string(),
            detail: e.to_string(),
        };
        fs::create_dir_all(dir).map_err(|e| io(dir, &e))?;
        let cfg = dir.join(CONFIG_FILE);
        let json = serde_json::to_string_pretty(&self.config).map_err(|e| io(&cfg, &e))?;
        fs::write(&cfg, json + "\n").map_err(|e| io(&cfg, &e))?;
        let vocab = dir.join(VOCAB_FILE);
        self.vocab.save(&vocab).map_err(|e| io(&vocab, &e))?;
        save_weights(&self.params, &dir.join(WEIGHTS_FILE))?;
        Ok(())
    }

    /// Loads a model directory written by [`HrModel::save`].
    pub fn load(dir: &Path) -> Result<Self, ModelError> {
        let cfg_path = dir.join(CONFIG_FILE);
        let text = fs::read_to_string(&cfg_path).map_err(|e| ModelError::Artifact {
            path: cfg_path.display().to_string(),
            detail: e.to_string(),
        })?;
        let config: HrModelConfig = serde_json::from_str(&text).map_err(|e| ModelError::Artifact {
            path: cfg_path.display().to_string(),
            detail: e.to_string(),
        })?;
        let vocab = Vocabulary::load(&dir.join(VOCAB_FILE))?;
        let mut model = Self::skeleton(config, vocab)?;
        load_weights(&dir.join(WEIGHTS_FILE), &mut model.params)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> HrModelConfig {
        let enc = EncoderConfig {
            image_size: 8,
            patch_size: 4,
            image_layers: 1,
            text_layers: 1,
            hidden: 8,
            heads: 2,
            embed_dim: 4,
            max_tokens: 8,
            vocab_size: 16,
            ..EncoderConfig::desk()
        };
        HrModelConfig::with_encoder(enc, vec![8, 4, 1])
    }

    fn model() -> HrModel {
        let vocab = Vocabulary::build(["cats like warm sun", "dogs like walks"], 16);
        HrModel::new(tiny(), vocab, 7).unwrap()
    }

    fn image(seed: u64) -> ImageInput {
        let px = (0..8 * 8 * 3)
            .map(|i| ((i as u64 * 2654435761 + seed) % 97) as f64 / 48.0 - 1.0)
            .collect();
        ImageInput::new(8, px).unwrap()
    }

    #[test]
    fn presets_validate() {
        HrModelConfig::paper().validate().unwrap();
        HrModelConfig::desk().validate().unwrap();
        assert_eq!(HrModelConfig::paper().fusion_dim, 1024);
        assert_eq!(HrModelConfig::paper().sentiment_hidden, vec![1024, 2048, 1024]);
    }

    #[test]
    fn rejects_inconsistent_widths() {
        let mut c = tiny();
        c.fusion_dim = 10;
        assert!(matches!(c.validate(), Err(ModelError::Config(_))));
        let mut c = tiny();
        c.head_widths = vec![8, 4, 2];
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.sentiment_hidden = vec![8, 16, 4];
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.dropout_p = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn outputs_are_probabilities_and_identities_hold() {
        let m = model();
        for text in ["", "cats like dogs", "unknown words only"] {
            for img in [None, Some(image(1))] {
                let r = m.predict(text, img.as_ref()).unwrap();
                for (name, v) in r.attributes() {
                    assert!(v > 0.0 && v < 1.0, "{name} = {v}");
                }
                assert!(r.sentiment_consistency > 0.0 && r.sentiment_consistency < 1.0);
                let d = derive_receptivity_metrics(r.ai_likelihood, r.belief, r.dissemination).unwrap();
                assert!((d.openness - r.openness).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn image_pathway_is_live_and_eval_is_deterministic() {
        let m = model();
        let a = m.predict("cats like sun", None).unwrap();
        let b = m.predict("cats like sun", Some(&image(3))).unwrap();
        assert_ne!(a, b);
        let c = m.predict("cats like sun", Some(&image(3))).unwrap();
        assert_eq!(b.belief.to_bits(), c.belief.to_bits());
    }

    #[test]
    fn batch_rows_match_single_predictions() {
        let m = model();
        let posts = vec![
            m.prepare("cats like sun", Some(image(1))),
            m.prepare("dogs like walks", None),
        ];
        let batch = m.predict_batch(&posts).unwrap();
        for (p, r) in posts.iter().zip(&batch) {
            let single = m.predict_batch(std::slice::from_ref(p)).unwrap()[0];
            assert!((single.belief - r.belief).abs() < 1e-12);
        }
    }

    #[test]
    fn every_group_receives_gradient() {
        let m = model();
        let posts = vec![m.prepare("cats like warm sun", Some(image(5)))];
        let mut tape = Tape::with_seed(1);
        let out = m.forward(&mut tape, &posts, true).unwrap();
        let target = tape.constant(Tensor::new(vec![1, 3], vec![0.9, 0.1, 0.5]).unwrap());
        let loss = tape.mse_loss(out.attributes, target).unwrap();
        let grads = tape.backward(loss).unwrap();
        for group in ["text.", "image.", "sentiment.fc", "heads."] {
            let total: f64 = grads
                .params()
                .filter(|(id, _)| m.params().name(*id).starts_with(group))
                .map(|(_, g)| g.iter().map(|v| v.abs()).sum::<f64>())
                .sum();
            assert!(total > 0.0, "{group} has no gradient");
        }
    }

    #[test]
    fn freeze_flag_marks_encoders_frozen() {
        let mut c = tiny();
        c.freeze_encoders = true;
        let m = HrModel::new(c, Vocabulary::default(), 1).unwrap();
        for (_, name, t) in m.params().iter() {
            let encoder = name.starts_with("text.") || name.starts_with("image.");
            assert_eq!(t.requires_grad(), !encoder, "{name}");
        }
    }

    #[test]
    fn directory_round_trip() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        m.save(dir.path()).unwrap();
        let back = HrModel::load(dir.path()).unwrap();
        assert_eq!(back.config(), m.config());
        assert_eq!(back.vocab(), m.vocab());
        assert_eq!(back.params(), m.params());
        let img = image(2);
        assert_eq!(
            back.predict("cats", Some(&img)).unwrap(),
            m.predict("cats", Some(&img)).unwrap()
        );
    }

    #[test]
    fn oversized_vocabulary_is_rejected() {
        let words: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
        let vocab = Vocabulary::build(words.iter().map(String::as_str), 100);
        assert!(matches!(HrModel::new(tiny(), vocab, 0), Err(ModelError::Config(_))));
    }
}
