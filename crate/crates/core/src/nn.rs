//! Parameterized layers shared by the encoders and the response heads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::tensor::{ParamId, ParamStore, Result, Tape, Tensor, Var};

/// Where initial parameter values come from.
#[allow(clippy::large_enum_variant)]
pub enum Init {
    Random(ChaCha8Rng),
    /// All zeros; used when the values are about to be overwritten by a load.
    Zeros,
}

impl Init {
    pub fn seeded(seed: u64) -> Self {
        Init::Random(ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Registers parameters under a common name prefix.
pub struct ParamBuilder<'a> {
    store: &'a mut ParamStore,
    init: &'a mut Init,
    prefix: String,
}

impl<'a> ParamBuilder<'a> {
    pub fn new(store: &'a mut ParamStore, init: &'a mut Init) -> Self {
        Self {
            store,
            init,
            prefix: String::new(),
        }
    }

    /// Builder for a nested scope, e.g. `text.block0`.
    pub fn scope(&mut self, name: &str) -> ParamBuilder<'_> {
        let prefix = if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        };
        ParamBuilder {
            store: &mut *self.store,
            init: &mut *self.init,
            prefix,
        }
    }

    fn full_name(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        }
    }

    pub fn normal(&mut self, name: &str, shape: &[usize], std: f64) -> ParamId {
        let n: usize = shape.iter().product();
        let data = match self.init {
            Init::Zeros => vec![0.0; n],
            Init::Random(rng) => {
                let dist = Normal::new(0.0, std).expect("std must be finite and positive");
                (0..n).map(|_| dist.sample(rng)).collect()
            }
        };
        let t = Tensor::new(shape.to_vec(), data).expect("param shape");
        self.store.add(self.full_name(name), t)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> ParamId {
        let value = match self.init {
            Init::Zeros => 0.0,
            Init::Random(_) => value,
        };
        self.store.add(self.full_name(name), Tensor::full(shape, value))
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(b: &mut ParamBuilder, name: &str, in_dim: usize, out_dim: usize, bias: bool) -> Self {
        let mut s = b.scope(name);
        let weight = s.normal("weight", &[in_dim, out_dim], 1.0 / (in_dim as f64).sqrt());
        let bias = bias.then(|| s.constant("bias", &[out_dim], 0.0));
        Self {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward<'p>(&self, tape: &mut Tape<'p>, store: &'p ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let y = tape.matmul(x, w)?;
        match self.bias {
            Some(b) => {
                let b = tape.param(store, b);
                tape.add_bias(y, b)
            }
            None => Ok(y),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(b: &mut ParamBuilder, name: &str, dim: usize, eps: f64) -> Self {
        let mut s = b.scope(name);
        Self {
            gamma: s.constant("gamma", &[dim], 1.0),
            beta: s.constant("beta", &[dim], 0.0),
            eps,
        }
    }

    pub fn forward<'p>(&self, tape: &mut Tape<'p>, store: &'p ParamStore, x: Var) -> Result<Var> {
        let g = tape.param(store, self.gamma);
        let b = tape.param(store, self.beta);
        tape.layer_norm(x, g, b, self.eps)
    }
}

/// Multi-head self-attention over a `[tokens, hidden]` sequence.
#[derive(Debug, Clone)]
pub struct SelfAttention {
    qkv: Linear,
    out: Linear,
    heads: usize,
    hidden: usize,
}

impl SelfAttention {
    pub fn new(b: &mut ParamBuilder, hidden: usize, heads: usize) -> Self {
        Self {
            qkv: Linear::new(b, "qkv", hidden, 3 * hidden, true),
            out: Linear::new(b, "out", hidden, hidden, true),
            heads,
            hidden,
        }
    }

    /// `mask`, when given, is added to every head's `[tokens, tokens]` scores.
    pub fn forward<'p>(&self, tape: &mut Tape<'p>, store: &'p ParamStore, x: Var, mask: Option<Var>) -> Result<Var> {
        let h = self.hidden;
        let hd = h / self.heads;
        let scale = 1.0 / (hd as f64).sqrt();
        let qkv = self.qkv.forward(tape, store, x)?;
        let mut outputs = Vec::with_capacity(self.heads);
        for i in 0..self.heads {
            let q = tape.slice_cols(qkv, i * hd, (i + 1) * hd)?;
            let k = tape.slice_cols(qkv, h + i * hd, h + (i + 1) * hd)?;
            let v = tape.slice_cols(qkv, 2 * h + i * hd, 2 * h + (i + 1) * hd)?;
            let kt = tape.transpose(k)?;
            let scores = tape.matmul(q, kt)?;
            let mut scores = tape.scale(scores, scale);
            if let Some(m) = mask {
                scores = tape.add(scores, m)?;
            }
            let attn = tape.softmax(scores, 1)?;
            outputs.push(tape.matmul(attn, v)?);
        }
        let merged = tape.concat_cols(&outputs)?;
        self.out.forward(tape, store, merged)
    }
}

/// Pre-norm transformer block: `x + attn(ln(x))`, then `x + mlp(ln(x))`.
#[derive(Debug, Clone)]
pub struct TransformerBlock {
    ln1: LayerNorm,
    attn: SelfAttention,
    ln2: LayerNorm,
    fc1: Linear,
    fc2: Linear,
}

impl TransformerBlock {
    pub fn new(b: &mut ParamBuilder, hidden: usize, heads: usize, mlp_ratio: usize, eps: f64) -> Self {
        Self {
            ln1: LayerNorm::new(b, "ln1", hidden, eps),
            attn: SelfAttention::new(&mut b.scope("attn"), hidden, heads),
            ln2: LayerNorm::new(b, "ln2", hidden, eps),
            fc1: Linear::new(b, "fc1", hidden, mlp_ratio * hidden, true),
            fc2: Linear::new(b, "fc2", mlp_ratio * hidden, hidden, true),
        }
    }

    pub fn forward<'p>(&self, tape: &mut Tape<'p>, store: &'p ParamStore, x: Var, mask: Option<Var>) -> Result<Var> {
        let n = self.ln1.forward(tape, store, x)?;
        let a = self.attn.forward(tape, store, n, mask)?;
        let x = tape.add(x, a)?;
        let n = self.ln2.forward(tape, store, x)?;
        let h = self.fc1.forward(tape, store, n)?;
        let h = tape.gelu(h);
        let h = self.fc2.forward(tape, store, h)?;
        tape.add(x, h)
    }
}
