//! Tokenizer and the two transformer encoders that turn a post's text and
//! image into fixed-width embeddings.

mod image;
mod text;
mod tokenizer;

pub use image::{ImageEncoder, ImageInput};
pub use text::TextEncoder;
pub use tokenizer::{split_words, TokenSequence, Vocabulary, BOS, EOS, OOV, PAD};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncoderError {
    #[error("invalid encoder config: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("vocabulary: {0}")]
    Vocabulary(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Geometry of both encoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub image_size: usize,
    pub patch_size: usize,
    pub image_layers: usize,
    pub text_layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub embed_dim: usize,
    pub max_tokens: usize,
    pub vocab_size: usize,
    pub mlp_ratio: usize,
    pub pixel_mean: [f64; 3],
    pub pixel_std: [f64; 3],
    pub ln_eps: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl EncoderConfig {
    /// ViT-B/32 image tower and a 12-layer, 768-wide text tower, both
    /// projecting to 512 dimensions.
    pub fn paper() -> Self {
        Self {
            image_size: 224,
            patch_size: 32,
            image_layers: 12,
            text_layers: 12,
            hidden: 768,
            heads: 12,
            embed_dim: 512,
            max_tokens: 77,
            vocab_size: 8192,
            mlp_ratio: 4,
            pixel_mean: [0.5; 3],
            pixel_std: [0.5; 3],
            ln_eps: 1e-5,
        }
    }

    /// Small geometry that trains in seconds on a CPU.
    pub fn desk() -> Self {
        Self {
            image_size: 32,
            patch_size: 8,
            image_layers: 2,
            text_layers: 2,
            hidden: 64,
            heads: 4,
            embed_dim: 32,
            max_tokens: 32,
            vocab_size: 1024,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        let fail = |m: String| Err(EncoderError::Config(m));
        if self.patch_size == 0 || self.image_size == 0 || !self.image_size.is_multiple_of(self.patch_size) {
            return fail(format!(
                "image_size {} must be a positive multiple of patch_size {}",
                self.image_size, self.patch_size
            ));
        }
        if self.heads == 0 || self.hidden == 0 || !self.hidden.is_multiple_of(self.heads) {
            return fail(format!(
                "hidden {} must be divisible by heads {}",
                self.hidden, self.heads
            ));
        }
        if self.embed_dim == 0 {
            return fail("embed_dim must be positive".into());
        }
        if self.max_tokens < 2 {
            return fail("max_tokens must be at least 2".into());
        }
        if self.vocab_size < 4 {
            return fail("vocab_size must cover the four reserved ids".into());
        }
        if self.mlp_ratio == 0 || self.ln_eps.is_nan() || self.ln_eps <= 0.0 {
            return fail("mlp_ratio and ln_eps must be positive".into());
        }
        if self.pixel_std.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return fail("pixel_std must be positive".into());
        }
        Ok(())
    }

    /// Patches per image side.
    pub fn grid(&self) -> usize {
        self.image_size / self.patch_size
    }

    /// Patch tokens per image, excluding the class token.
    pub fn num_patches(&self) -> usize {
        self.grid() * self.grid()
    }

    pub fn pixel_count(&self) -> usize {
        self.image_size * self.image_size * 3
    }
}
