//! Encoder-decoder transformer with GeLU feed-forward blocks, post-layer
//! normalization, learned positional embeddings, and a token embedding
//! shared by the encoder input, decoder input, and output projection.

pub mod checkpoint;
pub mod tensor;
pub mod transformer;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use tensor::{Matrix, Scalar};
pub use transformer::{
    accumulate_gradients, decode_step, encode_source, forward, gradients, loss, sequence_loss,
    Example,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite gradient in tensor `{0}`")]
    NonFiniteGradient(String),
    #[error("loss has no contributing positions (all targets are PAD)")]
    EmptyLoss,
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub vocab_size: usize,
    pub dropout: f64,
}

impl ModelConfig {
    /// Desk-scale default: small enough to train on one CPU core in minutes.
    pub fn desk(vocab_size: usize) -> Self {
        ModelConfig {
            enc_layers: 2,
            dec_layers: 2,
            d_model: 64,
            n_heads: 4,
            d_ff: 128,
            max_len: 256,
            vocab_size,
            dropout: 0.0,
        }
    }

    /// Tiny configuration used by gradient checks and decoding oracles.
    pub fn tiny(vocab_size: usize) -> Self {
        ModelConfig {
            enc_layers: 1,
            dec_layers: 1,
            d_model: 8,
            n_heads: 2,
            d_ff: 16,
            max_len: 32,
            vocab_size,
            dropout: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return Err(ModelError::Shape(format!(
                "d_model {} must be divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Shape(format!(
                "dropout {} must be in [0,1)",
                self.dropout
            )));
        }
        if self.vocab_size == 0 || self.max_len == 0 {
            return Err(ModelError::Shape("empty vocab or max_len".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights<T> {
    pub wq: Matrix<T>,
    pub wk: Matrix<T>,
    pub wv: Matrix<T>,
    pub wo: Matrix<T>,
    pub bq: Matrix<T>,
    pub bk: Matrix<T>,
    pub bv: Matrix<T>,
    pub bo: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardWeights<T> {
    pub w1: Matrix<T>,
    pub b1: Matrix<T>,
    pub w2: Matrix<T>,
    pub b2: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormWeights<T> {
    pub scale: Matrix<T>,
    pub bias: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer<T> {
    pub attn: AttentionWeights<T>,
    pub ln1: LayerNormWeights<T>,
    pub ff: FeedForwardWeights<T>,
    pub ln2: LayerNormWeights<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderLayer<T> {
    pub self_attn: AttentionWeights<T>,
    pub ln1: LayerNormWeights<T>,
    pub cross_attn: AttentionWeights<T>,
    pub ln2: LayerNormWeights<T>,
    pub ff: FeedForwardWeights<T>,
    pub ln3: LayerNormWeights<T>,
}

/// All trainable tensors. The token embedding is stored once and used at its
/// three tie points (encoder input, decoder input, output projection).
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<T> {
    pub token_embedding: Matrix<T>,
    pub enc_pos: Matrix<T>,
    pub dec_pos: Matrix<T>,
    pub enc_layers: Vec<EncoderLayer<T>>,
    pub dec_layers: Vec<DecoderLayer<T>>,
}

impl<T: Scalar> AttentionWeights<T> {
    fn zeros(d: usize) -> Self {
        AttentionWeights {
            wq: Matrix::zeros(d, d),
            wk: Matrix::zeros(d, d),
            wv: Matrix::zeros(d, d),
            wo: Matrix::zeros(d, d),
            bq: Matrix::zeros(1, d),
            bk: Matrix::zeros(1, d),
            bv: Matrix::zeros(1, d),
            bo: Matrix::zeros(1, d),
        }
    }
}

impl<T: Scalar> FeedForwardWeights<T> {
    fn zeros(d: usize, ff: usize) -> Self {
        FeedForwardWeights {
            w1: Matrix::zeros(d, ff),
            b1: Matrix::zeros(1, ff),
            w2: Matrix::zeros(ff, d),
            b2: Matrix::zeros(1, d),
        }
    }
}

impl<T: Scalar> LayerNormWeights<T> {
    fn zeros(d: usize) -> Self {
        LayerNormWeights {
            scale: Matrix::zeros(1, d),
            bias: Matrix::zeros(1, d),
        }
    }
}

impl<T: Scalar> Parameters<T> {
    /// Zeroed parameters congruent with `cfg`, used as gradient buffers and
    /// optimizer moments.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let d = cfg.d_model;
        Parameters {
            token_embedding: Matrix::zeros(cfg.vocab_size, d),
            enc_pos: Matrix::zeros(cfg.max_len, d),
            dec_pos: Matrix::zeros(cfg.max_len, d),
            enc_layers: (0..cfg.enc_layers)
                .map(|_| EncoderLayer {
                    attn: AttentionWeights::zeros(d),
                    ln1: LayerNormWeights::zeros(d),
                    ff: FeedForwardWeights::zeros(d, cfg.d_ff),
                    ln2: LayerNormWeights::zeros(d),
                })
                .collect(),
            dec_layers: (0..cfg.dec_layers)
                .map(|_| DecoderLayer {
                    self_attn: AttentionWeights::zeros(d),
                    ln1: LayerNormWeights::zeros(d),
                    cross_attn: AttentionWeights::zeros(d),
                    ln2: LayerNormWeights::zeros(d),
                    ff: FeedForwardWeights::zeros(d, cfg.d_ff),
                    ln3: LayerNormWeights::zeros(d),
                })
                .collect(),
        }
    }

    /// Deterministic initialization: N(0, 0.02) weights, zero biases, unit
    /// layer-norm scales.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut params = Self::zeros(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0f64, 0.02).expect("valid stddev");
        params.visit_mut(&mut |name, m| {
            let tail = name.rsplit('.').next().unwrap_or(name);
            match tail {
                "scale" => m.fill(T::ONE),
                "bias" | "bq" | "bk" | "bv" | "bo" | "b1" | "b2" => {}
                _ => {
                    for v in m.data.iter_mut() {
                        *v = T::from_f64(normal.sample(&mut rng));
                    }
                }
            }
        });
        params
    }

    /// Visit every named tensor in a fixed order.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&str, &'a Matrix<T>)) {
        f("embed.token", &self.token_embedding);
        f("enc.pos", &self.enc_pos);
        f("dec.pos", &self.dec_pos);
        for (i, l) in self.enc_layers.iter().enumerate() {
            let p = format!("enc.{i}");
            visit_attn(&format!("{p}.attn"), &l.attn, f);
            visit_ln(&format!("{p}.ln1"), &l.ln1, f);
            visit_ff(&format!("{p}.ff"), &l.ff, f);
            visit_ln(&format!("{p}.ln2"), &l.ln2, f);
        }
        for (i, l) in self.dec_layers.iter().enumerate() {
            let p = format!("dec.{i}");
            visit_attn(&format!("{p}.self_attn"), &l.self_attn, f);
            visit_ln(&format!("{p}.ln1"), &l.ln1, f);
            visit_attn(&format!("{p}.cross_attn"), &l.cross_attn, f);
            visit_ln(&format!("{p}.ln2"), &l.ln2, f);
            visit_ff(&format!("{p}.ff"), &l.ff, f);
            visit_ln(&format!("{p}.ln3"), &l.ln3, f);
        }
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(&str, &mut Matrix<T>)) {
        f("embed.token", &mut self.token_embedding);
        f("enc.pos", &mut self.enc_pos);
        f("dec.pos", &mut self.dec_pos);
        for (i, l) in self.enc_layers.iter_mut().enumerate() {
            let p = format!("enc.{i}");
            visit_attn_mut(&format!("{p}.attn"), &mut l.attn, f);
            visit_ln_mut(&format!("{p}.ln1"), &mut l.ln1, f);
            visit_ff_mut(&format!("{p}.ff"), &mut l.ff, f);
            visit_ln_mut(&format!("{p}.ln2"), &mut l.ln2, f);
        }
        for (i, l) in self.dec_layers.iter_mut().enumerate() {
            let p = format!("dec.{i}");
            visit_attn_mut(&format!("{p}.self_attn"), &mut l.self_attn, f);
            visit_ln_mut(&format!("{p}.ln1"), &mut l.ln1, f);
            visit_attn_mut(&format!("{p}.cross_attn"), &mut l.cross_attn, f);
            visit_ln_mut(&format!("{p}.ln2"), &mut l.ln2, f);
            visit_ff_mut(&format!("{p}.ff"), &mut l.ff, f);
            visit_ln_mut(&format!("{p}.ln3"), &mut l.ln3, f);
        }
    }

    pub fn named(&self) -> Vec<(String, &Matrix<T>)> {
        let mut out = Vec::new();
        self.visit(&mut |name, m| out.push((name.to_string(), m)));
        out
    }

    /// All tensors in visitation order, for lockstep iteration with a
    /// congruent parameter set.
    pub fn tensors(&self) -> Vec<&Matrix<T>> {
        let mut out = Vec::new();
        self.visit(&mut |_, m| out.push(m));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut out: Vec<&mut Matrix<T>> = vec![
            &mut self.token_embedding,
            &mut self.enc_pos,
            &mut self.dec_pos,
        ];
        for l in &mut self.enc_layers {
            out.extend([
                &mut l.attn.wq,
                &mut l.attn.wk,
                &mut l.attn.wv,
                &mut l.attn.wo,
                &mut l.attn.bq,
                &mut l.attn.bk,
                &mut l.attn.bv,
                &mut l.attn.bo,
                &mut l.ln1.scale,
                &mut l.ln1.bias,
                &mut l.ff.w1,
                &mut l.ff.b1,
                &mut l.ff.w2,
                &mut l.ff.b2,
                &mut l.ln2.scale,
                &mut l.ln2.bias,
            ]);
        }
        for l in &mut self.dec_layers {
            out.extend([
                &mut l.self_attn.wq,
                &mut l.self_attn.wk,
                &mut l.self_attn.wv,
                &mut l.self_attn.wo,
                &mut l.self_attn.bq,
                &mut l.self_attn.bk,
                &mut l.self_attn.bv,
                &mut l.self_attn.bo,
                &mut l.ln1.scale,
                &mut l.ln1.bias,
                &mut l.cross_attn.wq,
                &mut l.cross_attn.wk,
                &mut l.cross_attn.wv,
                &mut l.cross_attn.wo,
                &mut l.cross_attn.bq,
                &mut l.cross_attn.bk,
                &mut l.cross_attn.bv,
                &mut l.cross_attn.bo,
                &mut l.ln2.scale,
                &mut l.ln2.bias,
                &mut l.ff.w1,
                &mut l.ff.b1,
                &mut l.ff.w2,
                &mut l.ff.b2,
                &mut l.ln3.scale,
                &mut l.ln3.bias,
            ]);
        }
        out
    }

    pub fn all_finite(&self) -> Option<String> {
        let mut bad = None;
        self.visit(&mut |name, m| {
            if bad.is_none() && !m.all_finite() {
                bad = Some(name.to_string());
            }
        });
        bad
    }

    pub fn add_assign(&mut self, other: &Parameters<T>) {
        self.token_embedding.add_assign(&other.token_embedding);
        self.enc_pos.add_assign(&other.enc_pos);
        self.dec_pos.add_assign(&other.dec_pos);
        for (a, b) in self.enc_layers.iter_mut().zip(other.enc_layers.iter()) {
            add_attn(&mut a.attn, &b.attn);
            add_ln(&mut a.ln1, &b.ln1);
            add_ff(&mut a.ff, &b.ff);
            add_ln(&mut a.ln2, &b.ln2);
        }
        for (a, b) in self.dec_layers.iter_mut().zip(other.dec_layers.iter()) {
            add_attn(&mut a.self_attn, &b.self_attn);
            add_ln(&mut a.ln1, &b.ln1);
            add_attn(&mut a.cross_attn, &b.cross_attn);
            add_ln(&mut a.ln2, &b.ln2);
            add_ff(&mut a.ff, &b.ff);
            add_ln(&mut a.ln3, &b.ln3);
        }
    }

    pub fn scale(&mut self, s: T) {
        self.visit_mut(&mut |_, m| m.scale(s));
    }

    pub fn cast<U: Scalar>(&self) -> Parameters<U> {
        Parameters {
            token_embedding: self.token_embedding.cast(),
            enc_pos: self.enc_pos.cast(),
            dec_pos: self.dec_pos.cast(),
            enc_layers: self
                .enc_layers
                .iter()
                .map(|l| EncoderLayer {
                    attn: cast_attn(&l.attn),
                    ln1: cast_ln(&l.ln1),
                    ff: cast_ff(&l.ff),
                    ln2: cast_ln(&l.ln2),
                })
                .collect(),
            dec_layers: self
                .dec_layers
                .iter()
                .map(|l| DecoderLayer {
                    self_attn: cast_attn(&l.self_attn),
                    ln1: cast_ln(&l.ln1),
                    cross_attn: cast_attn(&l.cross_attn),
                    ln2: cast_ln(&l.ln2),
                    ff: cast_ff(&l.ff),
                    ln3: cast_ln(&l.ln3),
                })
                .collect(),
        }
    }
}

fn visit_attn<'a, T: Scalar>(
    p: &str,
    a: &'a AttentionWeights<T>,
    f: &mut impl FnMut(&str, &'a Matrix<T>),
) {
    f(&format!("{p}.wq"), &a.wq);
    f(&format!("{p}.wk"), &a.wk);
    f(&format!("{p}.wv"), &a.wv);
    f(&format!("{p}.wo"), &a.wo);
    f(&format!("{p}.bq"), &a.bq);
    f(&format!("{p}.bk"), &a.bk);
    f(&format!("{p}.bv"), &a.bv);
    f(&format!("{p}.bo"), &a.bo);
}

fn visit_ff<'a, T: Scalar>(
    p: &str,
    ff: &'a FeedForwardWeights<T>,
    f: &mut impl FnMut(&str, &'a Matrix<T>),
) {
    f(&format!("{p}.w1"), &ff.w1);
    f(&format!("{p}.b1"), &ff.b1);
    f(&format!("{p}.w2"), &ff.w2);
    f(&format!("{p}.b2"), &ff.b2);
}

fn visit_ln<'a, T: Scalar>(
    p: &str,
    ln: &'a LayerNormWeights<T>,
    f: &mut impl FnMut(&str, &'a Matrix<T>),
) {
    f(&format!("{p}.scale"), &ln.scale);
    f(&format!("{p}.bias"), &ln.bias);
}

fn visit_attn_mut<T: Scalar>(
    p: &str,
    a: &mut AttentionWeights<T>,
    f: &mut impl FnMut(&str, &mut Matrix<T>),
) {
    f(&format!("{p}.wq"), &mut a.wq);
    f(&format!("{p}.wk"), &mut a.wk);
    f(&format!("{p}.wv"), &mut a.wv);
    f(&format!("{p}.wo"), &mut a.wo);
    f(&format!("{p}.bq"), &mut a.bq);
    f(&format!("{p}.bk"), &mut a.bk);
    f(&format!("{p}.bv"), &mut a.bv);
    f(&format!("{p}.bo"), &mut a.bo);
}

fn visit_ff_mut<T: Scalar>(
    p: &str,
    ff: &mut FeedForwardWeights<T>,
    f: &mut impl FnMut(&str, &mut Matrix<T>),
) {
    f(&format!("{p}.w1"), &mut ff.w1);
    f(&format!("{p}.b1"), &mut ff.b1);
    f(&format!("{p}.w2"), &mut ff.w2);
    f(&format!("{p}.b2"), &mut ff.b2);
}

fn visit_ln_mut<T: Scalar>(
    p: &str,
    ln: &mut LayerNormWeights<T>,
    f: &mut impl FnMut(&str, &mut Matrix<T>),
) {
    f(&format!("{p}.scale"), &mut ln.scale);
    f(&format!("{p}.bias"), &mut ln.bias);
}

fn add_attn<T: Scalar>(a: &mut AttentionWeights<T>, b: &AttentionWeights<T>) {
    a.wq.add_assign(&b.wq);
    a.wk.add_assign(&b.wk);
    a.wv.add_assign(&b.wv);
    a.wo.add_assign(&b.wo);
    a.bq.add_assign(&b.bq);
    a.bk.add_assign(&b.bk);
    a.bv.add_assign(&b.bv);
    a.bo.add_assign(&b.bo);
}

fn add_ff<T: Scalar>(a: &mut FeedForwardWeights<T>, b: &FeedForwardWeights<T>) {
    a.w1.add_assign(&b.w1);
    a.b1.add_assign(&b.b1);
    a.w2.add_assign(&b.w2);
    a.b2.add_assign(&b.b2);
}

fn add_ln<T: Scalar>(a: &mut LayerNormWeights<T>, b: &LayerNormWeights<T>) {
    a.scale.add_assign(&b.scale);
    a.bias.add_assign(&b.bias);
}

fn cast_attn<T: Scalar, U: Scalar>(a: &AttentionWeights<T>) -> AttentionWeights<U> {
    AttentionWeights {
        wq: a.wq.cast(),
        wk: a.wk.cast(),
        wv: a.wv.cast(),
        wo: a.wo.cast(),
        bq: a.bq.cast(),
        bk: a.bk.cast(),
        bv: a.bv.cast(),
        bo: a.bo.cast(),
    }
}

fn cast_ff<T: Scalar, U: Scalar>(ff: &FeedForwardWeights<T>) -> FeedForwardWeights<U> {
    FeedForwardWeights {
        w1: ff.w1.cast(),
        b1: ff.b1.cast(),
        w2: ff.w2.cast(),
        b2: ff.b2.cast(),
    }
}

fn cast_ln<T: Scalar, U: Scalar>(ln: &LayerNormWeights<T>) -> LayerNormWeights<U> {
    LayerNormWeights {
        scale: ln.scale.cast(),
        bias: ln.bias.cast(),
    }
}
