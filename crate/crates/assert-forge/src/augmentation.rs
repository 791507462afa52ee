//! Test augmentation: pick one generated assert from a ranked candidate list
//! and insert it as the last executable statement of an existing test method.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{normalize_for_match, syntax_check};
use crate::java::{self, parse_method_source, JavaMethod, StmtKind, TokenKind};
use crate::mining::{assert_statements, ASSERT_NAMES};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error(transparent)]
    Java(#[from] java::JavaError),
    #[error("assert statement fails the syntax check: {0}")]
    InvalidAssert(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AugmentationResult {
    pub original_test: String,
    pub chosen_assert: Option<String>,
    pub augmented_test: Option<String>,
    pub rejected: Vec<(String, String)>,
}

/// Identifier tokens visible in a piece of source text.
fn identifier_tokens(source: &str) -> std::collections::HashSet<String> {
    match java::lex(source) {
        Ok(tokens) => tokens
            .into_iter()
            .filter(|t| t.kind == TokenKind::Ident)
            .map(|t| t.text)
            .collect(),
        Err(_) => Default::default(),
    }
}

/// Root identifiers of a candidate: identifier tokens not preceded by `.`,
/// excluding recognized assert names.
fn root_identifiers(candidate: &str) -> Vec<String> {
    let Ok(tokens) = java::lex(candidate) else {
        return Vec::new();
    };
    let mut roots = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        if t.kind != TokenKind::Ident {
            continue;
        }
        if i > 0 && tokens[i - 1].is_punct(".") {
            continue;
        }
        if ASSERT_NAMES.contains(&t.text.as_str()) || t.text == "Assert" || t.text == "Assertions" {
            continue;
        }
        roots.push(t.text.clone());
    }
    roots
}

/// Existing asserts in the test, normalized for duplicate detection.
fn existing_asserts(test: &JavaMethod) -> Vec<String> {
    assert_statements(test)
        .iter()
        .map(|span| {
            normalize_for_match(
                test.body_text[span.start..span.end]
                    .trim()
                    .trim_end_matches(';'),
            )
        })
        .collect()
}

/// Pick the first candidate that (a) passes the syntax check, (b) references
/// only identifiers visible in the test or the focal class, and (c) is not a
/// duplicate of an assert already in the test. Returns the choice plus every
/// rejection with its reason.
pub fn select_assert(
    candidates: &[String],
    test_source: &str,
    focal_source: &str,
) -> (Option<String>, Vec<(String, String)>) {
    let mut rejected = Vec::new();
    let mut scope = identifier_tokens(test_source);
    scope.extend(identifier_tokens(focal_source));
    let existing: Vec<String> = match parse_method_source(test_source) {
        Ok(method) => existing_asserts(&method),
        Err(_) => Vec::new(),
    };
    for candidate in candidates {
        if !syntax_check(candidate) {
            rejected.push((candidate.clone(), "syntax".to_string()));
            continue;
        }
        if let Some(unknown) = root_identifiers(candidate)
            .into_iter()
            .find(|r| !scope.contains(r))
        {
            rejected.push((
                candidate.clone(),
                format!("unresolved identifier `{unknown}`"),
            ));
            continue;
        }
        let norm = normalize_for_match(candidate);
        if existing.contains(&norm) {
            rejected.push((
                candidate.clone(),
                "duplicate of existing assert".to_string(),
            ));
            continue;
        }
        return (Some(candidate.clone()), rejected);
    }
    (None, rejected)
}

/// Insert `assert_stmt` as the last executable statement of the test method:
/// inside the outermost try block when the body is a single try statement,
/// and before a trailing return when one exists, so the assert stays
/// reachable.
pub fn insert_assert(test_source: &str, assert_stmt: &str) -> Result<String, AugmentError> {
    if !syntax_check(assert_stmt) {
        return Err(AugmentError::InvalidAssert(assert_stmt.to_string()));
    }
    let method = parse_method_source(test_source)?;
    let body = method.body.as_ref().ok_or_else(|| {
        AugmentError::Java(java::JavaError::Parse {
            offset: 0,
            message: "test method has no body".to_string(),
        })
    })?;

    // choose the insertion block: the try block when the body is a single try
    let (block_span, stmts): (java::Span, &[java::Stmt]) = match body.stmts.as_slice() {
        [only] if only.kind == StmtKind::Try && !only.blocks.is_empty() => {
            let tb = &only.blocks[0];
            (tb.span, tb.stmts.as_slice())
        }
        _ => (body.span, body.stmts.as_slice()),
    };

    // insert before a trailing return, otherwise before the closing brace
    let insert_at = match stmts.last() {
        Some(last) if last.kind == StmtKind::Return => last.span.start,
        _ => block_span.end - 1,
    };

    let stmt_text = assert_stmt.trim().trim_end_matches(';').trim_end();
    let mut out = String::with_capacity(test_source.len() + stmt_text.len() + 8);
    out.push_str(&test_source[..insert_at]);
    out.push_str(stmt_text);
    out.push_str("; ");
    out.push_str(&test_source[insert_at..]);

    // the result must re-parse
    parse_method_source(&out)?;
    Ok(out)
}

/// Select from the candidates and insert; the none-case (no usable
/// candidate) yields a result with no augmented test.
pub fn augment_test(
    test_source: &str,
    candidates: &[String],
    focal_source: &str,
) -> Result<AugmentationResult, AugmentError> {
    let (chosen, rejected) = select_assert(candidates, test_source, focal_source);
    let augmented = match &chosen {
        Some(assert_stmt) => Some(insert_assert(test_source, assert_stmt)?),
        None => None,
    };
    Ok(AugmentationResult {
        original_test: test_source.to_string(),
        chosen_assert: chosen,
        augmented_test: augmented,
        rejected,
    })
}

/// JSONL record mapping a test method to its generated candidates.
#[derive(Debug, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub method: String,
    pub candidates: Vec<String>,
}

/// Row of the augmentation report, mirroring the coverage table's
/// non-coverage columns.
#[derive(Debug, Serialize, Deserialize)]
pub struct AugmentReportRow {
    pub method: String,
    pub chosen: Option<String>,
    pub augmented: bool,
    pub rejected: Vec<(String, String)>,
}
