use crate::nn::{LayerNorm, Linear, ParamBuilder, TransformerBlock};
use crate::tensor::{ParamId, ParamStore, Tape, Tensor, Var};

use super::{EncoderConfig, EncoderError, TokenSequence};

/// Large negative score added for padded keys; exp() of it underflows to 0.
const MASKED: f64 = -1e9;

/// Token and learned positional embeddings, pre-norm transformer blocks,
/// masked mean pooling and a linear projection to `embed_dim`.
#[derive(Debug, Clone)]
pub struct TextEncoder {
    token_embed: ParamId,
    pos_embed: ParamId,
    blocks: Vec<TransformerBlock>,
    ln_final: LayerNorm,
    proj: Linear,
    vocab_size: usize,
    max_tokens: usize,
}

impl TextEncoder {
    pub fn new(b: &mut ParamBuilder, cfg: &EncoderConfig) -> Self {
        let token_embed = b.normal("token_embed", &[cfg.vocab_size, cfg.hidden], 0.02);
        let pos_embed = b.normal("pos_embed", &[cfg.max_tokens, cfg.hidden], 0.01);
        let blocks = (0..cfg.text_layers)
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
            token_embed,
            pos_embed,
            blocks,
            ln_final: LayerNorm::new(b, "ln_final", cfg.hidden, cfg.ln_eps),
            proj: Linear::new(b, "proj", cfg.hidden, cfg.embed_dim, false),
            vocab_size: cfg.vocab_size,
            max_tokens: cfg.max_tokens,
        }
    }

    /// `[1, embed_dim]` embedding of one token sequence.
    pub fn forward<'p>(
        &self,
        tape: &mut Tape<'p>,
        store: &'p ParamStore,
        tokens: &TokenSequence,
    ) -> Result<Var, EncoderError> {
        let n = tokens.ids.len();
        if n == 0 || n > self.max_tokens || tokens.attention_mask.len() != n {
            return Err(EncoderError::Input(format!(
                "token sequence of length {n} (mask {}) for max_tokens {}",
                tokens.attention_mask.len(),
                self.max_tokens
            )));
        }
        if let Some(bad) = tokens.ids.iter().find(|&&id| id >= self.vocab_size) {
            return Err(EncoderError::Input(format!(
                "token id {bad} outside vocabulary of {}",
                self.vocab_size
            )));
        }
        let real = tokens.real_len();
        if real == 0 {
            return Err(EncoderError::Input("no unmasked tokens".into()));
        }

        let table = tape.param(store, self.token_embed);
        let x = tape.gather_rows(table, &tokens.ids)?;
        let pos = tape.param(store, self.pos_embed);
        let pos = tape.slice_rows(pos, 0, n)?;
        let mut x = tape.add(x, pos)?;

        // Padded keys are excluded from every query's attention.
        let key_bias: Vec<f64> = tokens
            .attention_mask
            .iter()
            .map(|&m| if m == 1 { 0.0 } else { MASKED })
            .collect();
        let mask = Tensor::new(vec![n, n], key_bias.repeat(n))?;
        let mask = tape.constant(mask);
        for block in &self.blocks {
            x = block.forward(tape, store, x, Some(mask))?;
        }
        let x = self.ln_final.forward(tape, store, x)?;

        let weights: Vec<f64> = tokens
            .attention_mask
            .iter()
            .map(|&m| if m == 1 { 1.0 / real as f64 } else { 0.0 })
            .collect();
        let pool = tape.constant(Tensor::new(vec![1, n], weights)?);
        let pooled = tape.matmul(pool, x)?;
        Ok(self.proj.forward(tape, store, pooled)?)
    }
}
