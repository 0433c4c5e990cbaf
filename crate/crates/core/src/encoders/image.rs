use crate::nn::{LayerNorm, Linear, ParamBuilder, TransformerBlock};
use crate::tensor::{ParamId, ParamStore, Tape, Tensor, Var};

use super::{EncoderConfig, EncoderError};

/// Square RGB image, row-major height × width × channel, already normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageInput {
    size: usize,
    pixels: Vec<f64>,
}

impl ImageInput {
    pub fn new(size: usize, pixels: Vec<f64>) -> Result<Self, EncoderError> {
        if pixels.len() != size * size * 3 {
            return Err(EncoderError::Input(format!(
                "expected {} pixel values for a {size}x{size}x3 image, got {}",
                size * size * 3,
                pixels.len()
            )));
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(EncoderError::Input("non-finite pixel value".into()));
        }
        Ok(Self { size, pixels })
    }

    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            pixels: vec![0.0; size * size * 3],
        }
    }

    /// Resizes interleaved 8-bit RGB to the configured size with bilinear
    /// interpolation and applies per-channel `(v/255 − mean) / std`.
    pub fn from_rgb8(width: usize, height: usize, rgb: &[u8], cfg: &EncoderConfig) -> Result<Self, EncoderError> {
        if width == 0 || height == 0 || rgb.len() != width * height * 3 {
            return Err(EncoderError::Input(format!(
                "{} bytes for a {width}x{height} RGB image",
                rgb.len()
            )));
        }
        let src: Vec<f64> = rgb.iter().map(|&b| b as f64 / 255.0).collect();
        let s = cfg.image_size;
        let mut pixels = resize_bilinear(&src, width, height, 3, s, s);
        for (i, v) in pixels.iter_mut().enumerate() {
            let c = i % 3;
            *v = (*v - cfg.pixel_mean[c]) / cfg.pixel_std[c];
        }
        Self::new(s, pixels)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    /// `[patches, patch·patch·3]` matrix, patches in raster order.
    pub fn patchify(&self, patch: usize) -> Result<Tensor, EncoderError> {
        if patch == 0 || !self.size.is_multiple_of(patch) {
            return Err(EncoderError::Input(format!(
                "patch size {patch} does not tile a {}-pixel image",
                self.size
            )));
        }
        let grid = self.size / patch;
        let width = patch * patch * 3;
        let mut data = Vec::with_capacity(grid * grid * width);
        for pr in 0..grid {
            for pc in 0..grid {
                for dy in 0..patch {
                    let row = pr * patch + dy;
                    let start = (row * self.size + pc * patch) * 3;
                    data.extend_from_slice(&self.pixels[start..start + patch * 3]);
                }
            }
        }
        Ok(Tensor::new(vec![grid * grid, width], data)?)
    }
}

/// Bilinear resampling with half-pixel centers and edge clamping.
pub fn resize_bilinear(
    src: &[f64],
    width: usize,
    height: usize,
    channels: usize,
    out_width: usize,
    out_height: usize,
) -> Vec<f64> {
    let axis = |out: usize, inp: usize| -> Vec<(usize, usize, f64)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|o| {
                let pos = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (inp - 1) as f64);
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(inp - 1);
                (lo, hi, pos - lo as f64)
            })
            .collect()
    };
    let xs = axis(out_width, width);
    let ys = axis(out_height, height);
    let at = |x: usize, y: usize, c: usize| src[(y * width + x) * channels + c];
    let mut out = Vec::with_capacity(out_width * out_height * channels);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..channels {
                let top = at(x0, y0, c) * (1.0 - fx) + at(x1, y0, c) * fx;
                let bottom = at(x0, y1, c) * (1.0 - fx) + at(x1, y1, c) * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    out
}

/// ViT-style encoder: linear patch embedding, a learned class token and
/// positional embeddings, pre-norm blocks, class-token output projected to
/// `embed_dim`.
#[derive(Debug, Clone)]
pub struct ImageEncoder {
    patch_embed: Linear,
    class_token: ParamId,
    pos_embed: ParamId,
    ln_pre: LayerNorm,
    blocks: Vec<TransformerBlock>,
    ln_post: LayerNorm,
    proj: Linear,
    image_size: usize,
    patch_size: usize,
}

impl ImageEncoder {
    pub fn new(b: &mut ParamBuilder, cfg: &EncoderConfig) -> Self {
        let patch_dim = cfg.patch_size * cfg.patch_size * 3;
        let patch_embed = Linear::new(b, "patch_embed", patch_dim, cfg.hidden, true);
        let class_token = b.normal("class_token", &[1, cfg.hidden], 0.02);
        let pos_embed = b.normal("pos_embed", &[cfg.num_patches() + 1, cfg.hidden], 0.01);
        let ln_pre = LayerNorm::new(b, "ln_pre", cfg.hidden, cfg.ln_eps);
        let blocks = (0..cfg.image_layers)
            .map(|i| {
                TransformerBlock::new(
                    &mut b.scope(&format!("block{i}")),
                    cfg.hidden,
                    cfg.heads,
                    cfg.mlp_ratio,
                    cfg.ln_eps,
                )
            })
            .collect();
        Self {
            patch_embed,
            class_token,
            pos_embed,
            ln_pre,
            blocks,
            ln_post: LayerNorm::new(b, "ln_post", cfg.hidden, cfg.ln_eps),
            proj: Linear::new(b, "proj", cfg.hidden, cfg.embed_dim, false),
            image_size: cfg.image_size,
            patch_size: cfg.patch_size,
        }
    }

    pub fn patch_embed_params(&self) -> (ParamId, Option<ParamId>) {
        (self.patch_embed.weight, self.patch_embed.bias)
    }

    /// Token matrix entering the transformer: class token then one row per
    /// patch, positional embeddings added. Shape `[patches + 1, hidden]`.
    pub fn tokens<'p>(
        &self,
        tape: &mut Tape<'p>,
        store: &'p ParamStore,
        image: &ImageInput,
    ) -> Result<Var, EncoderError> {
        if image.size() != self.image_size {
            return Err(EncoderError::Input(format!(
                "image is {}px, encoder expects {}px",
                image.size(),
                self.image_size
            )));
        }
        let patches = tape.constant(image.patchify(self.patch_size)?);
        let x = self.patch_embed.forward(tape, store, patches)?;
        let cls = tape.param(store, self.class_token);
        let x = tape.concat_rows(&[cls, x])?;
        let pos = tape.param(store, self.pos_embed);
        Ok(tape.add(x, pos)?)
    }

    /// `[1, embed_dim]` embedding of one image.
    pub fn forward<'p>(
        &self,
        tape: &mut Tape<'p>,
        store: &'p ParamStore,
        image: &ImageInput,
    ) -> Result<Var, EncoderError> {
        let x = self.tokens(tape, store, image)?;
        let mut x = self.ln_pre.forward(tape, store, x)?;
        for block in &self.blocks {
            x = block.forward(tape, store, x, None)?;
        }
        let cls = tape.slice_rows(x, 0, 1)?;
        let cls = self.ln_post.forward(tape, store, cls)?;
        Ok(self.proj.forward(tape, store, cls)?)
    }
}
