//! Corruption transforms for denoising pretraining.
//!
//! English mode masks Poisson-length token spans (one mask symbol per span)
//! and permutes sentences; code mode deletes tokens independently and
//! rotates half of all documents. Targets stay clean; sources are corrupted.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::textprep::{TokenSequence, Vocabulary, MASK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    English,
    Code,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorruptionConfig {
    pub mode: NoiseMode,
    pub mask_rate: f64,
    pub poisson_lambda: f64,
    pub delete_rate: f64,
    pub rotate_fraction: f64,
    pub permute_sentences: bool,
    pub seed: u64,
}

impl CorruptionConfig {
    pub fn english(seed: u64) -> Self {
        CorruptionConfig {
            mode: NoiseMode::English,
            mask_rate: 0.30,
            poisson_lambda: 3.0,
            delete_rate: 0.20,
            rotate_fraction: 0.50,
            permute_sentences: true,
            seed,
        }
    }

    pub fn code(seed: u64) -> Self {
        CorruptionConfig {
            mode: NoiseMode::Code,
            ..CorruptionConfig::english(seed)
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("mask_rate", self.mask_rate),
            ("delete_rate", self.delete_rate),
            ("rotate_fraction", self.rotate_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must be in [0,1], got {v}"));
            }
        }
        if self.poisson_lambda <= 0.0 {
            return Err(format!(
                "poisson_lambda must be positive, got {}",
                self.poisson_lambda
            ));
        }
        Ok(())
    }
}

/// Derive the reproducible random stream for document `index`. The stream
/// depends only on (seed, index), so parallel corpus processing is
/// order-independent.
pub fn rng_for_doc(seed: u64, index: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

fn with_ids(ids: Vec<u32>, origin: &TokenSequence) -> TokenSequence {
    TokenSequence {
        ids,
        text_hash: origin.text_hash.clone(),
    }
}

/// Sample one Poisson span length.
pub fn sample_span_length(lambda: f64, rng: &mut impl Rng) -> usize {
    let poisson = Poisson::new(lambda).expect("lambda > 0");
    poisson.sample(rng) as usize
}

/// Replace Poisson-length spans with single mask tokens until at least
/// `mask_rate` of the original tokens are covered. Zero-length draws insert
/// a mask between tokens. Spans never overlap.
pub fn mask_spans(
    seq: &TokenSequence,
    cfg: &CorruptionConfig,
    rng: &mut impl Rng,
) -> TokenSequence {
    let len = seq.ids.len();
    if len < 2 || cfg.mask_rate <= 0.0 {
        return seq.clone();
    }
    let budget = cfg.mask_rate * len as f64;
    let mut covered = vec![false; len];
    let mut masked = 0usize;
    // insertions[i] counts masks inserted before position i
    let mut insertions = vec![0usize; len + 1];
    let mut span_start = vec![false; len];

    while (masked as f64) < budget && masked < len {
        let mut span = sample_span_length(cfg.poisson_lambda, rng);
        if span == 0 {
            let pos = rng.gen_range(0..=len);
            insertions[pos] += 1;
            continue;
        }
        let free = len - masked;
        if span > free {
            span = free;
        }
        // rejection-sample a non-overlapping start, then fall back to an
        // exhaustive scan so placement always succeeds while room remains
        let mut placed = None;
        for _ in 0..32 {
            let s = rng.gen_range(0..=len - span);
            if !covered[s..s + span].iter().any(|&c| c) {
                placed = Some(s);
                break;
            }
        }
        if placed.is_none() {
            let starts: Vec<usize> = (0..=len - span)
                .filter(|&s| !covered[s..s + span].iter().any(|&c| c))
                .collect();
            if starts.is_empty() {
                // no room for a span this long anywhere; retry with a new draw
                continue;
            }
            placed = Some(starts[rng.gen_range(0..starts.len())]);
        }
        let s = placed.expect("placement found");
        for c in covered.iter_mut().skip(s).take(span) {
            *c = true;
        }
        span_start[s] = true;
        masked += span;
    }

    let mut out = Vec::with_capacity(len);
    for (i, &id) in seq.ids.iter().enumerate() {
        out.extend(std::iter::repeat_n(MASK, insertions[i]));
        if span_start[i] {
            out.push(MASK);
        }
        if !covered[i] {
            out.push(id);
        }
    }
    out.extend(std::iter::repeat_n(MASK, insertions[len]));
    with_ids(out, seq)
}

/// Reorder the sentences delimited by `boundaries` (positions of
/// sentence-final tokens) with a uniform random permutation.
pub fn permute_sentences(
    seq: &TokenSequence,
    boundaries: &[usize],
    rng: &mut impl Rng,
) -> TokenSequence {
    use rand::seq::SliceRandom;
    let len = seq.ids.len();
    let mut segments: Vec<(usize, usize)> = Vec::new();
    let mut start = 0usize;
    for &b in boundaries {
        if b < len {
            segments.push((start, b + 1));
            start = b + 1;
        }
    }
    if start < len {
        segments.push((start, len));
    }
    if segments.len() < 2 {
        return seq.clone();
    }
    segments.shuffle(rng);
    let mut out = Vec::with_capacity(len);
    for (s, e) in segments {
        out.extend_from_slice(&seq.ids[s..e]);
    }
    with_ids(out, seq)
}

/// Drop each token independently with probability `delete_rate`, preserving
/// the order of survivors.
pub fn delete_tokens(
    seq: &TokenSequence,
    cfg: &CorruptionConfig,
    rng: &mut impl Rng,
) -> TokenSequence {
    let mut out = Vec::with_capacity(seq.ids.len());
    for &id in &seq.ids {
        if rng.gen::<f64>() >= cfg.delete_rate {
            out.push(id);
        }
    }
    with_ids(out, seq)
}

/// With probability `rotate_fraction`, rotate the document around a uniform
/// pivot; otherwise return it unchanged.
pub fn rotate_document(
    seq: &TokenSequence,
    cfg: &CorruptionConfig,
    rng: &mut impl Rng,
) -> TokenSequence {
    if seq.ids.is_empty() {
        return seq.clone();
    }
    if rng.gen::<f64>() >= cfg.rotate_fraction {
        return seq.clone();
    }
    let pivot = rng.gen_range(0..seq.ids.len());
    let mut out = Vec::with_capacity(seq.ids.len());
    out.extend_from_slice(&seq.ids[pivot..]);
    out.extend_from_slice(&seq.ids[..pivot]);
    with_ids(out, seq)
}

/// Positions of sentence-final tokens: tokens whose byte rendering ends
/// with a period.
pub fn sentence_boundaries(seq: &TokenSequence, vocab: &Vocabulary) -> Vec<usize> {
    seq.ids
        .iter()
        .enumerate()
        .filter(|(_, &id)| {
            !vocab.is_special(id)
                && vocab
                    .token_bytes(id)
                    .map(|b| b.last() == Some(&b'.'))
                    .unwrap_or(false)
        })
        .map(|(i, _)| i)
        .collect()
}

/// Build one (corrupted source, clean target) pair. The clean document is
/// truncated to `max_len` before corruption; insertions may not push the
/// source past `max_len` either.
pub fn make_denoising_pair(
    doc: &TokenSequence,
    vocab: &Vocabulary,
    cfg: &CorruptionConfig,
    max_len: usize,
    rng: &mut impl Rng,
) -> (TokenSequence, TokenSequence) {
    let mut clean = doc.clone();
    clean.ids.truncate(max_len);
    let mut source = match cfg.mode {
        NoiseMode::English => {
            let masked = mask_spans(&clean, cfg, rng);
            if cfg.permute_sentences {
                let boundaries = sentence_boundaries(&masked, vocab);
                permute_sentences(&masked, &boundaries, rng)
            } else {
                masked
            }
        }
        NoiseMode::Code => {
            let deleted = delete_tokens(&clean, cfg, rng);
            rotate_document(&deleted, cfg, rng)
        }
    };
    source.ids.truncate(max_len);
    (source, clean)
}

/// Corrupt a whole corpus with per-document random streams derived from the
/// config seed, so results do not depend on iteration order.
pub fn noise_corpus(
    docs: &[TokenSequence],
    vocab: &Vocabulary,
    cfg: &CorruptionConfig,
    max_len: usize,
) -> Vec<(TokenSequence, TokenSequence)> {
    docs.iter()
        .enumerate()
        .map(|(i, doc)| {
            let mut rng = rng_for_doc(cfg.seed, i as u64);
            make_denoising_pair(doc, vocab, cfg, max_len, &mut rng)
        })
        .collect()
}

/// Serialized pretraining pair: token ids for both sides.
#[derive(Debug, Serialize, Deserialize)]
pub struct NoisedRecord {
    pub source_ids: Vec<u32>,
    pub target_ids: Vec<u32>,
}

pub fn write_pairs_jsonl(
    pairs: &[(TokenSequence, TokenSequence)],
    path: &std::path::Path,
) -> std::io::Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    for (src, tgt) in pairs {
        let record = NoisedRecord {
            source_ids: src.ids.clone(),
            target_ids: tgt.ids.clone(),
        };
        serde_json::to_writer(&mut w, &record).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_pairs_jsonl(path: &std::path::Path) -> std::io::Result<Vec<NoisedRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(std::io::Error::other)?);
    }
    Ok(out)
}
