//! Forward pass, cross-entropy loss, and exact reverse-mode gradients.
//!
//! Sequences are processed one example at a time; batch operations loop in
//! example order and accumulate element-wise, so gradient accumulation over
//! micro-batches is bit-identical to one large batch.

use rand::Rng;

use super::tensor::{add_colsum, add_matmul_at_b, matmul, matmul_a_bt, Matrix, Scalar};
use super::{
    AttentionWeights, FeedForwardWeights, LayerNormWeights, ModelConfig, ModelError, Parameters,
};
use crate::textprep::PAD;

const LN_EPS: f64 = 1e-5;
const MASK_NEG: f64 = -1e30;

/// One training example: encoder input, decoder input (BOS-shifted), and
/// labels (EOS-terminated). All id sequences, no padding required.
#[derive(Debug, Clone)]
pub struct Example {
    pub src: Vec<u32>,
    pub tgt_in: Vec<u32>,
    pub tgt_out: Vec<u32>,
}

impl Example {
    /// Build from raw source/target token ids using the reserved BOS/EOS.
    pub fn from_pair(src: &[u32], tgt: &[u32], max_len: usize) -> Example {
        use crate::textprep::{BOS, EOS};
        let mut src: Vec<u32> = src
            .iter()
            .copied()
            .take(max_len.saturating_sub(1))
            .collect();
        src.push(EOS);
        let tgt: Vec<u32> = tgt
            .iter()
            .copied()
            .take(max_len.saturating_sub(1))
            .collect();
        let mut tgt_in = Vec::with_capacity(tgt.len() + 1);
        tgt_in.push(BOS);
        tgt_in.extend_from_slice(&tgt);
        let mut tgt_out = tgt;
        tgt_out.push(EOS);
        Example {
            src,
            tgt_in,
            tgt_out,
        }
    }
}

// ---------------------------------------------------------------------------
// forward caches
// ---------------------------------------------------------------------------

struct AttnCache<T> {
    q: Matrix<T>,
    k: Matrix<T>,
    v: Matrix<T>,
    attn: Vec<Matrix<T>>, // per head, q_len × k_len
    concat: Matrix<T>,
    query_input: Matrix<T>,
    key_input: Matrix<T>,
}

struct LnCache<T> {
    xhat: Matrix<T>,
    invstd: Vec<T>,
}

struct FfCache<T> {
    input: Matrix<T>,
    pre: Matrix<T>,
    act: Matrix<T>,
}

type DropMask<T> = Option<Matrix<T>>;

struct EncLayerTape<T> {
    attn: AttnCache<T>,
    drop_attn: DropMask<T>,
    ln1: LnCache<T>,
    ff: FfCache<T>,
    drop_ff: DropMask<T>,
    ln2: LnCache<T>,
}

struct DecLayerTape<T> {
    self_attn: AttnCache<T>,
    drop_sa: DropMask<T>,
    ln1: LnCache<T>,
    cross_attn: AttnCache<T>,
    drop_ca: DropMask<T>,
    ln2: LnCache<T>,
    ff: FfCache<T>,
    drop_ff: DropMask<T>,
    ln3: LnCache<T>,
}

pub(crate) struct Tape<T> {
    enc_input: Matrix<T>,
    drop_enc_embed: DropMask<T>,
    enc_layers: Vec<EncLayerTape<T>>,
    enc_out: Matrix<T>,
    dec_input: Matrix<T>,
    drop_dec_embed: DropMask<T>,
    dec_layers: Vec<DecLayerTape<T>>,
    dec_out: Matrix<T>,
    logits: Matrix<T>,
}

struct MaskSpec {
    causal: bool,
    key_pad: Vec<bool>,
}

impl MaskSpec {
    #[inline]
    fn masked(&self, qi: usize, kj: usize) -> bool {
        self.key_pad[kj] || (self.causal && kj > qi)
    }
}

// ---------------------------------------------------------------------------
// forward
// ---------------------------------------------------------------------------

fn check_ids(cfg: &ModelConfig, ids: &[u32], what: &str) -> Result<(), ModelError> {
    if ids.len() > cfg.max_len {
        return Err(ModelError::Shape(format!(
            "{what} length {} exceeds max_len {}",
            ids.len(),
            cfg.max_len
        )));
    }
    if let Some(&bad) = ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
        return Err(ModelError::Shape(format!(
            "{what} token id {bad} out of vocabulary (size {})",
            cfg.vocab_size
        )));
    }
    Ok(())
}

fn embed<T: Scalar>(
    token_embedding: &Matrix<T>,
    pos_embedding: &Matrix<T>,
    ids: &[u32],
) -> Matrix<T> {
    let d = token_embedding.cols;
    let mut out = Matrix::zeros(ids.len(), d);
    for (i, &id) in ids.iter().enumerate() {
        let tok = token_embedding.row(id as usize);
        let pos = pos_embedding.row(i);
        let row = out.row_mut(i);
        for j in 0..d {
            row[j] = tok[j] + pos[j];
        }
    }
    out
}

fn add_bias<T: Scalar>(m: &mut Matrix<T>, bias: &Matrix<T>) {
    for r in 0..m.rows {
        for (v, &b) in m.row_mut(r).iter_mut().zip(bias.row(0).iter()) {
            *v += b;
        }
    }
}

fn dropout<T: Scalar, R: Rng>(m: &mut Matrix<T>, rate: f64, rng: Option<&mut R>) -> DropMask<T> {
    let rng = match rng {
        Some(r) if rate > 0.0 => r,
        _ => return None,
    };
    let keep = T::from_f64(1.0 / (1.0 - rate));
    let mut mask = Matrix::zeros(m.rows, m.cols);
    for (v, mk) in m.data.iter_mut().zip(mask.data.iter_mut()) {
        if rng.gen::<f64>() < rate {
            *v = T::ZERO;
        } else {
            *v *= keep;
            *mk = keep;
        }
    }
    Some(mask)
}

fn apply_mask_grad<T: Scalar>(d: &mut Matrix<T>, mask: &DropMask<T>) {
    if let Some(mask) = mask {
        for (v, &m) in d.data.iter_mut().zip(mask.data.iter()) {
            *v *= m;
        }
    }
}

#[allow(clippy::needless_range_loop)] // masked positions skip the key row entirely
fn attention<T: Scalar>(
    cfg: &ModelConfig,
    w: &AttentionWeights<T>,
    query_input: &Matrix<T>,
    key_input: &Matrix<T>,
    mask: &MaskSpec,
) -> (Matrix<T>, AttnCache<T>) {
    let heads = cfg.n_heads;
    let dk = cfg.head_dim();
    let scale = T::from_f64(1.0 / (dk as f64).sqrt());

    let mut q = matmul(query_input, &w.wq);
    add_bias(&mut q, &w.bq);
    let mut k = matmul(key_input, &w.wk);
    add_bias(&mut k, &w.bk);
    let mut v = matmul(key_input, &w.wv);
    add_bias(&mut v, &w.bv);

    let q_len = q.rows;
    let k_len = k.rows;
    let mut concat = Matrix::zeros(q_len, cfg.d_model);
    let mut attn_heads = Vec::with_capacity(heads);
    for h in 0..heads {
        let off = h * dk;
        // scores = Qh Khᵀ / sqrt(dk), with mask
        let mut scores = Matrix::zeros(q_len, k_len);
        for i in 0..q_len {
            let q_row = &q.row(i)[off..off + dk];
            let s_row = scores.row_mut(i);
            for j in 0..k_len {
                if mask.masked(i, j) {
                    s_row[j] = T::from_f64(MASK_NEG);
                    continue;
                }
                let k_row = &k.row(j)[off..off + dk];
                let mut sum = T::ZERO;
                for (&a, &b) in q_row.iter().zip(k_row.iter()) {
                    sum += a * b;
                }
                s_row[j] = sum * scale;
            }
        }
        // row softmax
        for i in 0..q_len {
            let row = scores.row_mut(i);
            let mut max = row[0];
            for &x in row.iter() {
                max = max.maximum(x);
            }
            let mut sum = T::ZERO;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
        // context = A · Vh
        for i in 0..q_len {
            let a_row = scores.row(i);
            let out_row = &mut concat.row_mut(i)[off..off + dk];
            for (j, &a_ij) in a_row.iter().enumerate() {
                let v_row = &v.row(j)[off..off + dk];
                for (o, &vv) in out_row.iter_mut().zip(v_row.iter()) {
                    *o += a_ij * vv;
                }
            }
        }
        attn_heads.push(scores);
    }
    let mut out = matmul(&concat, &w.wo);
    add_bias(&mut out, &w.bo);
    let cache = AttnCache {
        q,
        k,
        v,
        attn: attn_heads,
        concat,
        query_input: query_input.clone(),
        key_input: key_input.clone(),
    };
    (out, cache)
}

fn layer_norm<T: Scalar>(ln: &LayerNormWeights<T>, input: &Matrix<T>) -> (Matrix<T>, LnCache<T>) {
    let d = input.cols;
    let inv_d = T::from_f64(1.0 / d as f64);
    let eps = T::from_f64(LN_EPS);
    let mut out = Matrix::zeros(input.rows, d);
    let mut xhat = Matrix::zeros(input.rows, d);
    let mut invstd = Vec::with_capacity(input.rows);
    for r in 0..input.rows {
        let row = input.row(r);
        let mut mean = T::ZERO;
        for &x in row {
            mean += x;
        }
        mean *= inv_d;
        let mut var = T::ZERO;
        for &x in row {
            let c = x - mean;
            var += c * c;
        }
        var *= inv_d;
        let istd = T::ONE / (var + eps).sqrt();
        invstd.push(istd);
        let xh_row = xhat.row_mut(r);
        for (j, &x) in row.iter().enumerate() {
            xh_row[j] = (x - mean) * istd;
        }
        let out_row = out.row_mut(r);
        for j in 0..d {
            out_row[j] = ln.scale.row(0)[j] * xh_row[j] + ln.bias.row(0)[j];
        }
    }
    (out, LnCache { xhat, invstd })
}

fn gelu<T: Scalar>(x: T) -> T {
    let half = T::from_f64(0.5);
    let inv_sqrt2 = T::from_f64(std::f64::consts::FRAC_1_SQRT_2);
    half * x * (T::ONE + (x * inv_sqrt2).erf())
}

fn gelu_grad<T: Scalar>(x: T) -> T {
    let half = T::from_f64(0.5);
    let inv_sqrt2 = T::from_f64(std::f64::consts::FRAC_1_SQRT_2);
    let phi_coeff = T::from_f64(1.0 / (2.0 * std::f64::consts::PI).sqrt());
    let cdf = half * (T::ONE + (x * inv_sqrt2).erf());
    let pdf = phi_coeff * (-(half * x * x)).exp();
    cdf + x * pdf
}

fn feed_forward<T: Scalar>(
    ff: &FeedForwardWeights<T>,
    input: &Matrix<T>,
) -> (Matrix<T>, FfCache<T>) {
    let mut pre = matmul(input, &ff.w1);
    add_bias(&mut pre, &ff.b1);
    let mut act = pre.clone();
    for v in act.data.iter_mut() {
        *v = gelu(*v);
    }
    let mut out = matmul(&act, &ff.w2);
    add_bias(&mut out, &ff.b2);
    (
        out,
        FfCache {
            input: input.clone(),
            pre,
            act,
        },
    )
}

fn forward_with_tape<T: Scalar, R: Rng>(
    cfg: &ModelConfig,
    params: &Parameters<T>,
    src: &[u32],
    tgt_in: &[u32],
    rng: Option<&mut R>,
) -> Result<Tape<T>, ModelError> {
    let e = &params.token_embedding;
    forward_with_tape_untied(cfg, params, (e, e, e), src, tgt_in, rng)
}

/// Forward pass with the three embedding tie points supplied separately
/// (encoder input, decoder input, output projection). The production path
/// passes the shared tensor three times; tests untie them to verify the
/// shared-embedding gradient decomposition.
pub(crate) fn forward_with_tape_untied<T: Scalar, R: Rng>(
    cfg: &ModelConfig,
    params: &Parameters<T>,
    embeds: (&Matrix<T>, &Matrix<T>, &Matrix<T>),
    src: &[u32],
    tgt_in: &[u32],
    mut rng: Option<&mut R>,
) -> Result<Tape<T>, ModelError> {
    let (enc_emb, dec_emb, out_emb) = embeds;
    check_ids(cfg, src, "source")?;
    check_ids(cfg, tgt_in, "target prefix")?;
    if src.is_empty() {
        return Err(ModelError::Shape("empty source sequence".into()));
    }
    let src_pad: Vec<bool> = src.iter().map(|&id| id == PAD).collect();
    let tgt_pad: Vec<bool> = tgt_in.iter().map(|&id| id == PAD).collect();

    // encoder
    let mut enc_x = embed(enc_emb, &params.enc_pos, src);
    let drop_enc_embed = dropout(&mut enc_x, cfg.dropout, rng.as_deref_mut());
    let enc_input = enc_x.clone();
    let src_mask = MaskSpec {
        causal: false,
        key_pad: src_pad.clone(),
    };
    let mut enc_layers = Vec::with_capacity(cfg.enc_layers);
    for layer in &params.enc_layers {
        let (mut attn_out, attn_cache) = attention(cfg, &layer.attn, &enc_x, &enc_x, &src_mask);
        let drop_attn = dropout(&mut attn_out, cfg.dropout, rng.as_deref_mut());
        attn_out.add_assign(&enc_x);
        let (x1, ln1) = layer_norm(&layer.ln1, &attn_out);
        let (mut ff_out, ff_cache) = feed_forward(&layer.ff, &x1);
        let drop_ff = dropout(&mut ff_out, cfg.dropout, rng.as_deref_mut());
        ff_out.add_assign(&x1);
        let (x2, ln2) = layer_norm(&layer.ln2, &ff_out);
        enc_layers.push(EncLayerTape {
            attn: attn_cache,
            drop_attn,
            ln1,
            ff: ff_cache,
            drop_ff,
            ln2,
        });
        enc_x = x2;
    }
    let enc_out = enc_x;

    // decoder
    let mut dec_x = embed(dec_emb, &params.dec_pos, tgt_in);
    let drop_dec_embed = dropout(&mut dec_x, cfg.dropout, rng.as_deref_mut());
    let dec_input = dec_x.clone();
    let tgt_mask = MaskSpec {
        causal: true,
        key_pad: tgt_pad,
    };
    let mut dec_layers = Vec::with_capacity(cfg.dec_layers);
    for layer in &params.dec_layers {
        let (mut sa_out, sa_cache) = attention(cfg, &layer.self_attn, &dec_x, &dec_x, &tgt_mask);
        let drop_sa = dropout(&mut sa_out, cfg.dropout, rng.as_deref_mut());
        sa_out.add_assign(&dec_x);
        let (y1, ln1) = layer_norm(&layer.ln1, &sa_out);
        let (mut ca_out, ca_cache) = attention(cfg, &layer.cross_attn, &y1, &enc_out, &src_mask);
        let drop_ca = dropout(&mut ca_out, cfg.dropout, rng.as_deref_mut());
        ca_out.add_assign(&y1);
        let (y2, ln2) = layer_norm(&layer.ln2, &ca_out);
        let (mut ff_out, ff_cache) = feed_forward(&layer.ff, &y2);
        let drop_ff = dropout(&mut ff_out, cfg.dropout, rng.as_deref_mut());
        ff_out.add_assign(&y2);
        let (y3, ln3) = layer_norm(&layer.ln3, &ff_out);
        dec_layers.push(DecLayerTape {
            self_attn: sa_cache,
            drop_sa,
            ln1,
            cross_attn: ca_cache,
            drop_ca,
            ln2,
            ff: ff_cache,
            drop_ff,
            ln3,
        });
        dec_x = y3;
    }
    let dec_out = dec_x;

    // output projection through the shared embedding
    let logits = matmul_a_bt(&dec_out, out_emb);
    Ok(Tape {
        enc_input,
        drop_enc_embed,
        enc_layers,
        enc_out,
        dec_input,
        drop_dec_embed,
        dec_layers,
        dec_out,
        logits,
    })
}

/// Run the model on one (source, target-prefix) pair and return logits of
/// shape `tgt_len × vocab`. Dropout is disabled.
pub fn forward<T: Scalar>(
    cfg: &ModelConfig,
    params: &Parameters<T>,
    src: &[u32],
    tgt_in: &[u32],
) -> Result<Matrix<T>, ModelError> {
    let tape = forward_with_tape::<T, rand_chacha::ChaCha8Rng>(cfg, params, src, tgt_in, None)?;
    Ok(tape.logits)
}

/// Encode a source once for repeated decoding.
pub fn encode_source<T: Scalar>(
    cfg: &ModelConfig,
    params: &Parameters<T>,
    src: &[u32],
) -> Result<Matrix<T>, ModelError> {
    let tape = forward_with_tape::<T, rand_chacha::ChaCha8Rng>(cfg, params, src, &[1], None)?;
    Ok(tape.enc_out)
}

/// Decoder-only pass against a precomputed encoder output; returns the
/// logits row for the last prefix position.
pub fn decode_step<T: Scalar>(
    cfg: &ModelConfig,
    params: &Parameters<T>,
    enc_out: &Matrix<T>,
    src: &[u32],
    tgt_prefix: &[u32],
) -> Result<Vec<T>, ModelError> {
    check_ids(cfg, tgt_prefix, "target prefix")?;
    if tgt_prefix.is_empty() {
        return Err(ModelError::Shape("empty decode prefix".into()));
    }
    let src_pad: Vec<bool> = src.iter().map(|&id| id == PAD).collect();
    let tgt_pad: Vec<bool> = tgt_prefix.iter().map(|&id| id == PAD).collect();
    let src_mask = MaskSpec {
        causal: false,
        key_pad: src_pad,
    };
    let tgt_mask = MaskSpec {
        causal: true,
        key_pad: tgt_pad,
    };
    let mut dec_x = embed(&params.token_embedding, &params.dec_pos, tgt_prefix);
    for layer in &params.dec_layers {
        let (mut sa_out, _) = attention(cfg, &layer.self_attn, &dec_x, &dec_x, &tgt_mask);
        sa_out.add_assign(&dec_x);
        let (y1, _) = layer_norm(&layer.ln1, &sa_out);
        let (mut ca_out, _) = attention(cfg, &layer.cross_attn, &y1, enc_out, &src_mask);
        ca_out.add_assign(&y1);
        let (y2, _) = layer_norm(&layer.ln2, &ca_out);
        let (mut ff_out, _) = feed_forward(&layer.ff, &y2);
        ff_out.add_assign(&y2);
        let (y3, _) = layer_norm(&layer.ln3, &ff_out);
        dec_x = y3;
    }
    let last = dec_x.rows - 1;
    let last_row = Matrix::from_vec(1, dec_x.cols, dec_x.row(last).to_vec());
    let logits = matmul_a_bt(&last_row, &params.token_embedding);
    Ok(logits.data)
}

// ---------------------------------------------------------------------------
// loss
// ---------------------------------------------------------------------------

/// Sum of token cross-entropies over non-PAD positions, with the token
/// count. `d_logits` (when given) receives `softmax − onehot` rows.
fn loss_and_grad<T: Scalar>(
    logits: &Matrix<T>,
    targets: &[u32],
    mut d_logits: Option<&mut Matrix<T>>,
) -> Result<(f64, usize), ModelError> {
    if logits.rows != targets.len() {
        return Err(ModelError::Shape(format!(
            "logit rows {} != target length {}",
            logits.rows,
            targets.len()
        )));
    }
    let mut loss_sum = 0.0f64;
    let mut tokens = 0usize;
    for (r, &label) in targets.iter().enumerate() {
        if label == PAD {
            continue;
        }
        if label as usize >= logits.cols {
            return Err(ModelError::Shape(format!(
                "label {label} out of vocabulary {}",
                logits.cols
            )));
        }
        let row = logits.row(r);
        let mut max = row[0];
        for &x in row {
            max = max.maximum(x);
        }
        let mut denom = T::ZERO;
        for &x in row {
            denom += (x - max).exp();
        }
        let log_denom = denom.ln();
        let label_logit = row[label as usize];
        loss_sum += (log_denom - (label_logit - max)).to_f64();
        tokens += 1;
        if let Some(d) = d_logits.as_deref_mut() {
            let d_row = d.row_mut(r);
            for (j, &x) in row.iter().enumerate() {
                let p = ((x - max).exp()) / denom;
                d_row[j] = if j == label as usize { p - T::ONE } else { p };
            }
        }
    }
    if tokens == 0 {
        return Err(ModelError::EmptyLoss);
    }
    Ok((loss_sum, tokens))
}

/// Mean token-level cross-entropy over non-PAD positions of a batch of
/// per-example logits.
pub fn loss<T: Scalar>(
    logits_batch: &[Matrix<T>],
    targets: &[Vec<u32>],
) -> Result<f64, ModelError> {
    if logits_batch.len() != targets.len() {
        return Err(ModelError::Shape("batch length mismatch".into()));
    }
    let mut sum = 0.0;
    let mut tokens = 0usize;
    for (logits, tgt) in logits_batch.iter().zip(targets.iter()) {
        match loss_and_grad::<T>(logits, tgt, None) {
            Ok((s, n)) => {
                sum += s;
                tokens += n;
            }
            Err(ModelError::EmptyLoss) => {}
            Err(e) => return Err(e),
        }
    }
    if tokens == 0 {
        return Err(ModelError::EmptyLoss);
    }
    Ok(sum / tokens as f64)
}

/// Loss of a single example under the current parameters (dropout off).
pub fn sequence_loss<T: Scalar>(
    cfg: &ModelConfig,
    params: &Parameters<T>,
    example: &Example,
) -> Result<(f64, usize), ModelError> {
    let logits = forward(cfg, params, &example.src, &example.tgt_in)?;
    loss_and_grad::<T>(&logits, &example.tgt_out, None)
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

fn layer_norm_backward<T: Scalar>(
    ln: &LayerNormWeights<T>,
    cache: &LnCache<T>,
    d_out: &Matrix<T>,
    g: &mut LayerNormWeights<T>,
    d_input: &mut Matrix<T>,
) {
    let d = d_out.cols;
    let inv_d = T::from_f64(1.0 / d as f64);
    for r in 0..d_out.rows {
        let d_row = d_out.row(r);
        let xh_row = cache.xhat.row(r);
        let istd = cache.invstd[r];
        // parameter gradients
        for j in 0..d {
            g.scale.row_mut(0)[j] += d_row[j] * xh_row[j];
            g.bias.row_mut(0)[j] += d_row[j];
        }
        // input gradient
        let mut m1 = T::ZERO;
        let mut m2 = T::ZERO;
        let scale = ln.scale.row(0);
        for j in 0..d {
            let dxh = d_row[j] * scale[j];
            m1 += dxh;
            m2 += dxh * xh_row[j];
        }
        m1 *= inv_d;
        m2 *= inv_d;
        let din_row = d_input.row_mut(r);
        for j in 0..d {
            let dxh = d_row[j] * scale[j];
            din_row[j] += istd * (dxh - m1 - xh_row[j] * m2);
        }
    }
}

fn feed_forward_backward<T: Scalar>(
    ff: &FeedForwardWeights<T>,
    cache: &FfCache<T>,
    d_out: &Matrix<T>,
    g: &mut FeedForwardWeights<T>,
    d_input: &mut Matrix<T>,
) {
    // out = act·w2 + b2 ; w2 is (ff × d), so d_act = d_out · w2ᵀ
    let mut d_act = matmul(d_out, &transpose(&ff.w2));
    add_matmul_at_b(&mut g.w2, &cache.act, d_out);
    add_colsum(&mut g.b2, d_out);
    // act = gelu(pre)
    for (d, &p) in d_act.data.iter_mut().zip(cache.pre.data.iter()) {
        *d *= gelu_grad(p);
    }
    // pre = input·w1 + b1 ; w1 is (d × ff), so d_input += d_act · w1ᵀ
    add_matmul_at_b(&mut g.w1, &cache.input, &d_act);
    add_colsum(&mut g.b1, &d_act);
    let d_in = matmul(&d_act, &transpose(&ff.w1));
    d_input.add_assign(&d_in);
}

fn transpose<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    let mut t = Matrix::zeros(m.cols, m.rows);
    for r in 0..m.rows {
        for c in 0..m.cols {
            t.set(c, r, m.get(r, c));
        }
    }
    t
}

/// Backward through one attention block. Returns the gradients w.r.t. the
/// query input and the key/value input; the caller routes them (they are the
/// same tensor for self-attention).
#[allow(clippy::needless_range_loop)]
fn attention_backward<T: Scalar>(
    cfg: &ModelConfig,
    w: &AttentionWeights<T>,
    cache: &AttnCache<T>,
    d_out: &Matrix<T>,
    g: &mut AttentionWeights<T>,
) -> (Matrix<T>, Matrix<T>) {
    let heads = cfg.n_heads;
    let dk = cfg.head_dim();
    let scale = T::from_f64(1.0 / (dk as f64).sqrt());
    let q_len = cache.q.rows;
    let k_len = cache.k.rows;

    // out = concat·wo + bo
    let d_concat = matmul(d_out, &transpose(&w.wo));
    add_matmul_at_b(&mut g.wo, &cache.concat, d_out);
    add_colsum(&mut g.bo, d_out);

    let mut d_q = Matrix::zeros(q_len, cfg.d_model);
    let mut d_k = Matrix::zeros(k_len, cfg.d_model);
    let mut d_v = Matrix::zeros(k_len, cfg.d_model);

    for h in 0..heads {
        let off = h * dk;
        let attn = &cache.attn[h];
        // dA = d_ctx_h · Vhᵀ ; dV_h = Aᵀ · d_ctx_h
        let mut d_attn = Matrix::zeros(q_len, k_len);
        for i in 0..q_len {
            let d_ctx = &d_concat.row(i)[off..off + dk];
            let da_row = d_attn.row_mut(i);
            for j in 0..k_len {
                let v_row = &cache.v.row(j)[off..off + dk];
                let mut sum = T::ZERO;
                for (&a, &b) in d_ctx.iter().zip(v_row.iter()) {
                    sum += a * b;
                }
                da_row[j] = sum;
            }
        }
        for j in 0..k_len {
            let dv_row = &mut d_v.row_mut(j)[off..off + dk];
            for i in 0..q_len {
                let a_ij = attn.get(i, j);
                let d_ctx = &d_concat.row(i)[off..off + dk];
                for (o, &dc) in dv_row.iter_mut().zip(d_ctx.iter()) {
                    *o += a_ij * dc;
                }
            }
        }
        // softmax backward: dS = A ⊙ (dA − rowdot(dA, A))
        let mut d_scores = Matrix::zeros(q_len, k_len);
        for i in 0..q_len {
            let a_row = attn.row(i);
            let da_row = d_attn.row(i);
            let mut dot = T::ZERO;
            for (&a, &da) in a_row.iter().zip(da_row.iter()) {
                dot += a * da;
            }
            let ds_row = d_scores.row_mut(i);
            for j in 0..k_len {
                ds_row[j] = a_row[j] * (da_row[j] - dot);
            }
        }
        // dQ_h = dS·K_h·scale ; dK_h = dSᵀ·Q_h·scale
        for i in 0..q_len {
            let ds_row = d_scores.row(i);
            let dq_row = &mut d_q.row_mut(i)[off..off + dk];
            for j in 0..k_len {
                let s = ds_row[j] * scale;
                let k_row = &cache.k.row(j)[off..off + dk];
                for (o, &kk) in dq_row.iter_mut().zip(k_row.iter()) {
                    *o += s * kk;
                }
            }
        }
        for j in 0..k_len {
            let dk_row = &mut d_k.row_mut(j)[off..off + dk];
            for i in 0..q_len {
                let s = d_scores.get(i, j) * scale;
                let q_row = &cache.q.row(i)[off..off + dk];
                for (o, &qq) in dk_row.iter_mut().zip(q_row.iter()) {
                    *o += s * qq;
                }
            }
        }
    }

    // q = query_input·wq + bq, etc.
    add_matmul_at_b(&mut g.wq, &cache.query_input, &d_q);
    add_colsum(&mut g.bq, &d_q);
    let d_query_input = matmul(&d_q, &transpose(&w.wq));

    add_matmul_at_b(&mut g.wk, &cache.key_input, &d_k);
    add_colsum(&mut g.bk, &d_k);
    add_matmul_at_b(&mut g.wv, &cache.key_input, &d_v);
    add_colsum(&mut g.bv, &d_v);
    let mut d_key_input = matmul(&d_k, &transpose(&w.wk));
    d_key_input.add_assign(&matmul(&d_v, &transpose(&w.wv)));
    (d_query_input, d_key_input)
}

fn embed_backward<T: Scalar>(
    ids: &[u32],
    d_embed: &Matrix<T>,
    g_token: &mut Matrix<T>,
    g_pos: &mut Matrix<T>,
) {
    for (i, &id) in ids.iter().enumerate() {
        let d_row = d_embed.row(i);
        let tok_row = g_token.row_mut(id as usize);
        for (t, &d) in tok_row.iter_mut().zip(d_row.iter()) {
            *t += d;
        }
        let pos_row = g_pos.row_mut(i);
        for (p, &d) in pos_row.iter_mut().zip(d_row.iter()) {
            *p += d;
        }
    }
}

/// Run one example forward and backward, adding raw (unnormalized) gradient
/// sums into `grads`. Returns (cross-entropy sum, token count).
pub fn accumulate_gradients<T: Scalar, R: Rng>(
    cfg: &ModelConfig,
    params: &Parameters<T>,
    example: &Example,
    grads: &mut Parameters<T>,
    rng: Option<&mut R>,
) -> Result<(f64, usize), ModelError> {
    let tape = forward_with_tape(cfg, params, &example.src, &example.tgt_in, rng)?;
    let mut d_logits = Matrix::zeros(tape.logits.rows, tape.logits.cols);
    let (loss_sum, tokens) = loss_and_grad(&tape.logits, &example.tgt_out, Some(&mut d_logits))?;

    // logits = dec_out · Eᵀ: gradient reaches both the decoder output and
    // the shared embedding (output-projection tie point)
    let mut d_dec = matmul(&d_logits, &params.token_embedding);
    add_matmul_at_b(&mut grads.token_embedding, &d_logits, &tape.dec_out);

    // decoder stack, reversed
    let mut d_enc_out = Matrix::zeros(tape.enc_out.rows, tape.enc_out.cols);
    for li in (0..params.dec_layers.len()).rev() {
        let layer = &params.dec_layers[li];
        let tape_l = &tape.dec_layers[li];
        let gl = &mut grads.dec_layers[li];
        let rows = d_dec.rows;
        let cols = d_dec.cols;

        // y3 = LN3(y2 + drop(ff(y2)))
        let mut d_sum3 = Matrix::zeros(rows, cols);
        layer_norm_backward(&layer.ln3, &tape_l.ln3, &d_dec, &mut gl.ln3, &mut d_sum3);
        let mut d_ff_out = d_sum3.clone();
        apply_mask_grad(&mut d_ff_out, &tape_l.drop_ff);
        let mut d_y2 = d_sum3;
        feed_forward_backward(&layer.ff, &tape_l.ff, &d_ff_out, &mut gl.ff, &mut d_y2);

        // y2 = LN2(y1 + drop(cross(y1, enc_out)))
        let mut d_sum2 = Matrix::zeros(rows, cols);
        layer_norm_backward(&layer.ln2, &tape_l.ln2, &d_y2, &mut gl.ln2, &mut d_sum2);
        let mut d_ca = d_sum2.clone();
        apply_mask_grad(&mut d_ca, &tape_l.drop_ca);
        let mut d_y1 = d_sum2;
        let (dq, dkv) = attention_backward(
            cfg,
            &layer.cross_attn,
            &tape_l.cross_attn,
            &d_ca,
            &mut gl.cross_attn,
        );
        d_y1.add_assign(&dq);
        d_enc_out.add_assign(&dkv);

        // y1 = LN1(y0 + drop(self(y0)))
        let mut d_sum1 = Matrix::zeros(rows, cols);
        layer_norm_backward(&layer.ln1, &tape_l.ln1, &d_y1, &mut gl.ln1, &mut d_sum1);
        let mut d_sa = d_sum1.clone();
        apply_mask_grad(&mut d_sa, &tape_l.drop_sa);
        let mut d_y0 = d_sum1;
        let (dq, dkv) = attention_backward(
            cfg,
            &layer.self_attn,
            &tape_l.self_attn,
            &d_sa,
            &mut gl.self_attn,
        );
        d_y0.add_assign(&dq);
        d_y0.add_assign(&dkv);
        d_dec = d_y0;
    }
    let mut d_dec_embed = d_dec;
    apply_mask_grad(&mut d_dec_embed, &tape.drop_dec_embed);
    embed_backward(
        &example.tgt_in,
        &d_dec_embed,
        &mut grads.token_embedding,
        &mut grads.dec_pos,
    );

    // encoder stack, reversed
    let mut d_enc = d_enc_out;
    for li in (0..params.enc_layers.len()).rev() {
        let layer = &params.enc_layers[li];
        let tape_l = &tape.enc_layers[li];
        let gl = &mut grads.enc_layers[li];
        let rows = d_enc.rows;
        let cols = d_enc.cols;

        let mut d_sum2 = Matrix::zeros(rows, cols);
        layer_norm_backward(&layer.ln2, &tape_l.ln2, &d_enc, &mut gl.ln2, &mut d_sum2);
        let mut d_ff_out = d_sum2.clone();
        apply_mask_grad(&mut d_ff_out, &tape_l.drop_ff);
        let mut d_x1 = d_sum2;
        feed_forward_backward(&layer.ff, &tape_l.ff, &d_ff_out, &mut gl.ff, &mut d_x1);

        let mut d_sum1 = Matrix::zeros(rows, cols);
        layer_norm_backward(&layer.ln1, &tape_l.ln1, &d_x1, &mut gl.ln1, &mut d_sum1);
        let mut d_attn = d_sum1.clone();
        apply_mask_grad(&mut d_attn, &tape_l.drop_attn);
        let mut d_x0 = d_sum1;
        let (dq, dkv) = attention_backward(cfg, &layer.attn, &tape_l.attn, &d_attn, &mut gl.attn);
        d_x0.add_assign(&dq);
        d_x0.add_assign(&dkv);
        d_enc = d_x0;
    }
    let mut d_enc_embed = d_enc;
    apply_mask_grad(&mut d_enc_embed, &tape.drop_enc_embed);
    embed_backward(
        &example.src,
        &d_enc_embed,
        &mut grads.token_embedding,
        &mut grads.enc_pos,
    );

    let _ = (&tape.enc_input, &tape.dec_input);
    Ok((loss_sum, tokens))
}

/// Exact mean-loss gradients over a batch, congruent with `Parameters`.
pub fn gradients<T: Scalar>(
    cfg: &ModelConfig,
    params: &Parameters<T>,
    batch: &[Example],
) -> Result<(Parameters<T>, f64), ModelError> {
    let mut grads = Parameters::zeros(cfg);
    let mut loss_sum = 0.0;
    let mut tokens = 0usize;
    for example in batch {
        let (s, n) = accumulate_gradients::<T, rand_chacha::ChaCha8Rng>(
            cfg, params, example, &mut grads, None,
        )?;
        loss_sum += s;
        tokens += n;
    }
    if tokens == 0 {
        return Err(ModelError::EmptyLoss);
    }
    grads.scale(T::from_f64(1.0 / tokens as f64));
    if let Some(name) = grads.all_finite() {
        return Err(ModelError::NonFiniteGradient(name));
    }
    Ok((grads, loss_sum / tokens as f64))
}
