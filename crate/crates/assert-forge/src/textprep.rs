//! Shared subword vocabulary: byte-level BPE with reserved special tokens.
//!
//! The base alphabet is all 256 bytes, so any text is representable and
//! round-trips exactly. Merges never cross whitespace, which also makes
//! encoding prefix-stable at whitespace boundaries.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mining::PLACEHOLDER;

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;
pub const MASK: u32 = 4;
pub const PLACEHOLDER_ID: u32 = 5;

const NUM_SPECIALS: u32 = 6;
const BASE_SIZE: u32 = NUM_SPECIALS + 256;
const SPECIAL_NAMES: [&str; 6] = ["<PAD>", "<BOS>", "<EOS>", "<UNK>", "<MASK>", PLACEHOLDER];

#[derive(Debug, Error)]
pub enum TextPrepError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("vocab_size {0} is below the minimum of {BASE_SIZE}")]
    VocabTooSmall(u32),
    #[error("malformed vocabulary file: {0}")]
    MalformedVocab(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Trained vocabulary: 6 reserved specials, the 256-byte base alphabet, and
/// learned merges. Immutable once trained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    /// Token byte strings indexed by id; specials hold their display names.
    id_to_token: Vec<Vec<u8>>,
    /// Merge rules as (left id, right id), in training order; rule `r`
    /// produces id `BASE_SIZE + r`.
    merges: Vec<(u32, u32)>,
    /// Lookup from pair to merge rank.
    merge_rank: HashMap<(u32, u32), u32>,
}

/// A tokenized text with a digest of its originating string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub text_hash: String,
}

enum Chunk<'a> {
    Word(&'a str),
    Whitespace(char),
    Placeholder,
}

fn chunks(text: &str) -> Vec<Chunk<'_>> {
    let mut out = Vec::new();
    let mut word_start = 0usize;
    let mut i = 0usize;
    while i < text.len() {
        if text[i..].starts_with(PLACEHOLDER) {
            if word_start < i {
                out.push(Chunk::Word(&text[word_start..i]));
            }
            out.push(Chunk::Placeholder);
            i += PLACEHOLDER.len();
            word_start = i;
            continue;
        }
        let c = text[i..].chars().next().expect("in-bounds char");
        if c.is_whitespace() {
            if word_start < i {
                out.push(Chunk::Word(&text[word_start..i]));
            }
            out.push(Chunk::Whitespace(c));
            i += c.len_utf8();
            word_start = i;
            continue;
        }
        i += c.len_utf8();
    }
    if word_start < text.len() {
        out.push(Chunk::Word(&text[word_start..]));
    }
    out
}

impl Vocabulary {
    fn with_merges(merges: Vec<(u32, u32)>) -> Self {
        let mut id_to_token: Vec<Vec<u8>> = SPECIAL_NAMES
            .iter()
            .map(|s| s.as_bytes().to_vec())
            .collect();
        for b in 0..=255u8 {
            id_to_token.push(vec![b]);
        }
        let mut merge_rank = HashMap::new();
        for (rank, &(l, r)) in merges.iter().enumerate() {
            let mut bytes = id_to_token[l as usize].clone();
            bytes.extend_from_slice(&id_to_token[r as usize]);
            id_to_token.push(bytes);
            merge_rank.insert((l, r), rank as u32);
        }
        Vocabulary {
            id_to_token,
            merges,
            merge_rank,
        }
    }

    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn merges(&self) -> &[(u32, u32)] {
        &self.merges
    }

    pub fn token_bytes(&self, id: u32) -> Option<&[u8]> {
        self.id_to_token.get(id as usize).map(|v| v.as_slice())
    }

    pub fn is_special(&self, id: u32) -> bool {
        id < NUM_SPECIALS
    }

    /// Apply merge rules to one word chunk, lowest rank first.
    fn encode_word(&self, word: &str, out: &mut Vec<u32>) {
        let mut ids: Vec<u32> = word.bytes().map(|b| NUM_SPECIALS + b as u32).collect();
        loop {
            let mut best: Option<(u32, usize)> = None;
            for i in 0..ids.len().saturating_sub(1) {
                if let Some(&rank) = self.merge_rank.get(&(ids[i], ids[i + 1])) {
                    if best.map(|(r, _)| rank < r).unwrap_or(true) {
                        best = Some((rank, i));
                    }
                }
            }
            let Some((rank, _)) = best else {
                break;
            };
            let (l, r) = self.merges[rank as usize];
            let merged = BASE_SIZE + rank;
            let mut next = Vec::with_capacity(ids.len());
            let mut i = 0;
            while i < ids.len() {
                if i + 1 < ids.len() && ids[i] == l && ids[i + 1] == r {
                    next.push(merged);
                    i += 2;
                } else {
                    next.push(ids[i]);
                    i += 1;
                }
            }
            ids = next;
        }
        out.extend_from_slice(&ids);
    }

    /// Serialize to the vocabulary file format: a merge-rule header followed
    /// by one token per line.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        s.push_str("assert-forge-vocab v1\n");
        let _ = writeln!(s, "merges {}", self.merges.len());
        for (l, r) in &self.merges {
            let _ = writeln!(s, "{l} {r}");
        }
        let _ = writeln!(s, "tokens {}", self.id_to_token.len());
        for (id, tok) in self.id_to_token.iter().enumerate() {
            if (id as u32) < NUM_SPECIALS {
                let _ = writeln!(s, "{}", SPECIAL_NAMES[id]);
            } else {
                let _ = writeln!(s, "{}", escape_bytes(tok));
            }
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), TextPrepError> {
        std::fs::write(path, self.serialize())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TextPrepError> {
        let text = std::fs::read_to_string(path)?;
        Self::deserialize(&text)
    }

    pub fn deserialize(text: &str) -> Result<Self, TextPrepError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != "assert-forge-vocab v1" {
            return Err(TextPrepError::MalformedVocab("bad header".into()));
        }
        let merges_line = lines
            .next()
            .ok_or_else(|| TextPrepError::MalformedVocab("missing merges count".into()))?;
        let n: usize = merges_line
            .strip_prefix("merges ")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| TextPrepError::MalformedVocab("bad merges count".into()))?;
        let mut merges = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| TextPrepError::MalformedVocab("truncated merges".into()))?;
            let mut parts = line.split_whitespace();
            let l: u32 = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| TextPrepError::MalformedVocab("bad merge rule".into()))?;
            let r: u32 = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| TextPrepError::MalformedVocab("bad merge rule".into()))?;
            merges.push((l, r));
        }
        let vocab = Vocabulary::with_merges(merges);
        // the token section is informational; verify the count matches
        if let Some(line) = lines.next() {
            let m: usize = line
                .strip_prefix("tokens ")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| TextPrepError::MalformedVocab("bad tokens count".into()))?;
            if m != vocab.size() {
                return Err(TextPrepError::MalformedVocab(format!(
                    "token count {m} does not match merges (expect {})",
                    vocab.size()
                )));
            }
        }
        Ok(vocab)
    }

    /// SHA-256 of the canonical serialization, recorded in checkpoints.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.serialize().as_bytes());
        hex_string(&hasher.finalize())
    }
}

fn escape_bytes(bytes: &[u8]) -> String {
    let mut s = String::new();
    for &b in bytes {
        if b.is_ascii_graphic() && b != b'\\' {
            s.push(b as char);
        } else {
            let _ = write!(s, "\\x{b:02x}");
        }
    }
    s
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub fn text_digest(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hex_string(&hasher.finalize())
}

/// Train a byte-level BPE vocabulary. Merge selection is deterministic:
/// highest pair frequency, ties broken by lexicographic order of the pair's
/// byte strings. Training stops when the budget is reached or no pair occurs
/// at least twice.
pub fn train_vocab<I, S>(corpus: I, vocab_size: u32) -> Result<Vocabulary, TextPrepError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if vocab_size < BASE_SIZE {
        return Err(TextPrepError::VocabTooSmall(vocab_size));
    }
    // word frequency table; merges apply within words only
    let mut word_counts: HashMap<Vec<u32>, u64> = HashMap::new();
    let mut saw_text = false;
    for text in corpus {
        let text = text.as_ref();
        if !text.is_empty() {
            saw_text = true;
        }
        for chunk in chunks(text) {
            if let Chunk::Word(w) = chunk {
                let ids: Vec<u32> = w.bytes().map(|b| NUM_SPECIALS + b as u32).collect();
                *word_counts.entry(ids).or_insert(0) += 1;
            }
        }
    }
    if !saw_text {
        return Err(TextPrepError::EmptyCorpus);
    }

    let mut vocab = Vocabulary::with_merges(Vec::new());
    let budget = vocab_size - BASE_SIZE;
    let mut words: Vec<(Vec<u32>, u64)> = word_counts.into_iter().collect();
    // sort for deterministic iteration independent of hash order
    words.sort();

    for _ in 0..budget {
        let mut pair_counts: HashMap<(u32, u32), u64> = HashMap::new();
        for (ids, count) in &words {
            for w in ids.windows(2) {
                *pair_counts.entry((w[0], w[1])).or_insert(0) += count;
            }
        }
        let best = pair_counts
            .iter()
            .filter(|(_, &c)| c >= 2)
            .min_by(|a, b| {
                b.1.cmp(a.1).then_with(|| {
                    let ka = (
                        &vocab.id_to_token[a.0 .0 as usize],
                        &vocab.id_to_token[a.0 .1 as usize],
                    );
                    let kb = (
                        &vocab.id_to_token[b.0 .0 as usize],
                        &vocab.id_to_token[b.0 .1 as usize],
                    );
                    ka.cmp(&kb)
                })
            })
            .map(|(&pair, _)| pair);
        let Some((l, r)) = best else {
            break;
        };
        let rank = vocab.merges.len() as u32;
        let merged = BASE_SIZE + rank;
        let mut bytes = vocab.id_to_token[l as usize].clone();
        bytes.extend_from_slice(&vocab.id_to_token[r as usize]);
        vocab.id_to_token.push(bytes);
        vocab.merges.push((l, r));
        vocab.merge_rank.insert((l, r), rank);
        for (ids, _) in &mut words {
            let mut next = Vec::with_capacity(ids.len());
            let mut i = 0;
            while i < ids.len() {
                if i + 1 < ids.len() && ids[i] == l && ids[i + 1] == r {
                    next.push(merged);
                    i += 2;
                } else {
                    next.push(ids[i]);
                    i += 1;
                }
            }
            *ids = next;
        }
    }
    Ok(vocab)
}

/// Encode text to token ids. `<AssertPlaceHolder>` always becomes the single
/// reserved placeholder id.
pub fn encode(text: &str, vocab: &Vocabulary) -> TokenSequence {
    let mut ids = Vec::new();
    for chunk in chunks(text) {
        match chunk {
            Chunk::Placeholder => ids.push(PLACEHOLDER_ID),
            Chunk::Whitespace(c) => {
                let mut buf = [0u8; 4];
                for b in c.encode_utf8(&mut buf).bytes() {
                    ids.push(NUM_SPECIALS + b as u32);
                }
            }
            Chunk::Word(w) => vocab.encode_word(w, &mut ids),
        }
    }
    TokenSequence {
        ids,
        text_hash: text_digest(text),
    }
}

/// Decode token ids back to text. PAD/BOS/EOS are dropped, MASK renders as
/// `<MASK>`, UNK as the replacement character.
pub fn decode(ids: &[u32], vocab: &Vocabulary) -> String {
    let mut bytes: Vec<u8> = Vec::new();
    for &id in ids {
        match id {
            PAD | BOS | EOS => {}
            UNK => bytes.extend_from_slice("\u{FFFD}".as_bytes()),
            MASK => bytes.extend_from_slice(b"<MASK>"),
            PLACEHOLDER_ID => bytes.extend_from_slice(PLACEHOLDER.as_bytes()),
            other => {
                if let Some(tok) = vocab.token_bytes(other) {
                    bytes.extend_from_slice(tok);
                }
            }
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}
