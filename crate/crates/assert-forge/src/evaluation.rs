//! Evaluation metrics: top-k exact-match accuracy, BLEU4, syntactic
//! correctness of generated asserts, and report assembly.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::java::{self, statement_is_valid};
use crate::mining::normalize_ws;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("candidate and target lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("reference is empty")]
    EmptyReference,
}

/// Render a statement as space-separated code tokens, the layout the
/// reference corpus uses (`epsilon [ n ]`). Falls back to plain whitespace
/// collapse when the text does not lex.
pub fn code_token_text(s: &str) -> String {
    match java::lex(s) {
        Ok(tokens) => tokens
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" "),
        Err(_) => normalize_ws(s),
    }
}

/// Exact-match normalization: collapse whitespace and strip one trailing
/// semicolon.
pub fn normalize_for_match(s: &str) -> String {
    let collapsed = normalize_ws(s);
    collapsed
        .strip_suffix(';')
        .map(|t| t.trim_end().to_string())
        .unwrap_or(collapsed)
}

/// Count examples whose target appears among the first `k` candidates after
/// normalization.
pub fn top_k_accuracy(
    candidates: &[Vec<String>],
    targets: &[String],
    k: usize,
) -> Result<(usize, f64), EvalError> {
    if candidates.len() != targets.len() {
        return Err(EvalError::LengthMismatch(candidates.len(), targets.len()));
    }
    let mut correct = 0usize;
    for (cands, target) in candidates.iter().zip(targets.iter()) {
        let want = normalize_for_match(target);
        if cands.iter().take(k).any(|c| normalize_for_match(c) == want) {
            correct += 1;
        }
    }
    let n = targets.len().max(1);
    Ok((correct, correct as f64 / n as f64))
}

fn ngram_counts<'a>(tokens: &[&'a str], n: usize) -> HashMap<Vec<&'a str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothing {
    /// Plain modified precisions; any zero n-gram precision zeroes the score.
    None,
    /// Add-one on the 2..4-gram precisions, for sentence-level diagnostics.
    AddOne,
}

/// Sentence-level BLEU4 in [0, 100]: geometric mean of modified 1..4-gram
/// precisions times a brevity penalty.
pub fn bleu4(
    candidate: &[&str],
    reference: &[&str],
    smoothing: Smoothing,
) -> Result<f64, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let mut log_sum = 0.0f64;
    for n in 1..=4 {
        let cand_counts = ngram_counts(candidate, n);
        let ref_counts = ngram_counts(reference, n);
        let total: usize = candidate.len().saturating_sub(n - 1);
        let matched: usize = cand_counts
            .iter()
            .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
            .sum();
        let (num, den) = match smoothing {
            Smoothing::AddOne if n >= 2 => (matched + 1, total + 1),
            _ => (matched, total),
        };
        if num == 0 || den == 0 {
            return Ok(0.0);
        }
        log_sum += (num as f64 / den as f64).ln();
    }
    let bp = brevity_penalty(candidate.len(), reference.len());
    Ok(100.0 * bp * (log_sum / 4.0).exp())
}

fn brevity_penalty(cand_len: usize, ref_len: usize) -> f64 {
    if cand_len == 0 {
        return 0.0;
    }
    if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    }
}

/// Corpus-level BLEU4: n-gram match and total counts pool over all pairs
/// before taking precisions. No smoothing.
pub fn corpus_bleu4(pairs: &[(String, String)]) -> Result<f64, EvalError> {
    if pairs.iter().any(|(_, r)| r.trim().is_empty()) {
        return Err(EvalError::EmptyReference);
    }
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let mut cand_len = 0usize;
    let mut ref_len = 0usize;
    for (cand, reference) in pairs {
        let cand_tokens: Vec<&str> = cand.split_whitespace().collect();
        let ref_tokens: Vec<&str> = reference.split_whitespace().collect();
        cand_len += cand_tokens.len();
        ref_len += ref_tokens.len();
        for n in 1..=4 {
            let cand_counts = ngram_counts(&cand_tokens, n);
            let ref_counts = ngram_counts(&ref_tokens, n);
            matched[n - 1] += cand_counts
                .iter()
                .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
                .sum::<usize>();
            total[n - 1] += cand_tokens.len().saturating_sub(n - 1);
        }
    }
    let mut log_sum = 0.0f64;
    for n in 0..4 {
        if matched[n] == 0 || total[n] == 0 {
            return Ok(0.0);
        }
        log_sum += (matched[n] as f64 / total[n] as f64).ln();
    }
    Ok(100.0 * brevity_penalty(cand_len, ref_len) * (log_sum / 4.0).exp())
}

/// True iff the assert parses as a statement inside a minimal method
/// scaffold (`class C { void m() { <s>; } }`).
pub fn syntax_check(assert_string: &str) -> bool {
    statement_is_valid(assert_string)
}

/// Assembled evaluation results, shaped like the reference tables: top-k
/// accuracy over k = 1..=50, corpus BLEU4 of the rank-1 candidates, and
/// syntax-correctness averaged over all candidates at depths 1, 25, 50.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub topk: BTreeMap<usize, (usize, f64)>,
    pub bleu4: f64,
    pub syntax: BTreeMap<usize, f64>,
    pub valid_loss: Option<f64>,
}

pub fn evaluate(
    candidates: &[Vec<String>],
    targets: &[String],
    valid_loss: Option<f64>,
) -> Result<EvalReport, EvalError> {
    if candidates.len() != targets.len() {
        return Err(EvalError::LengthMismatch(candidates.len(), targets.len()));
    }
    let mut topk = BTreeMap::new();
    for k in 1..=50 {
        topk.insert(k, top_k_accuracy(candidates, targets, k)?);
    }
    // BLEU operates on code-token text so that n-grams up to 4 exist for
    // ordinary single-call asserts
    let pairs: Vec<(String, String)> = candidates
        .iter()
        .zip(targets.iter())
        .map(|(cands, t)| {
            (
                cands
                    .first()
                    .map(|c| code_token_text(&normalize_for_match(c)))
                    .unwrap_or_default(),
                code_token_text(&normalize_for_match(t)),
            )
        })
        .collect();
    let bleu = if pairs.is_empty() {
        0.0
    } else {
        corpus_bleu4(&pairs).unwrap_or(0.0)
    };
    let mut syntax = BTreeMap::new();
    for depth in [1usize, 25, 50] {
        let mut valid = 0usize;
        let mut total = 0usize;
        for cands in candidates {
            for c in cands.iter().take(depth) {
                total += 1;
                if syntax_check(c) {
                    valid += 1;
                }
            }
        }
        let frac = if total == 0 {
            0.0
        } else {
            valid as f64 / total as f64
        };
        syntax.insert(depth, frac);
    }
    Ok(EvalReport {
        n: targets.len(),
        topk,
        bleu4: bleu,
        syntax,
        valid_loss,
    })
}

/// Render the report as a text table shaped like the reference tables.
pub fn render_report(report: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Accurate Predictions (n = {})", report.n);
    let _ = writeln!(s, "{:>6}  {:>10}  {:>8}", "Top-K", "Correct", "Percent");
    for k in [1usize, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50] {
        if let Some((count, frac)) = report.topk.get(&k) {
            let _ = writeln!(s, "{k:>6}  {count:>10}  {:>7.2}%", frac * 100.0);
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Intrinsic Evaluation Metrics");
    let _ = writeln!(s, "BLEU4           {:>8.2}", report.bleu4);
    match report.valid_loss {
        Some(loss) => {
            let _ = writeln!(s, "Validation Loss {loss:>8.4}");
        }
        None => {
            let _ = writeln!(s, "Validation Loss        -");
        }
    }
    for depth in [1usize, 25, 50] {
        if let Some(frac) = report.syntax.get(&depth) {
            let _ = writeln!(s, "Syntax Top-{depth:<4} {:>7.2}%", frac * 100.0);
        }
    }
    s
}
