//! Test-Assert-Pair mining: find JUnit test methods with a single assert,
//! resolve the focal method they exercise, replace the assert with a
//! placeholder, and emit a parallel corpus.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::java::{self, parse_compilation_unit, JavaMethod, ParsedClass, Span, Stmt, StmtKind};

/// Literal token standing in for the removed assert statement.
pub const PLACEHOLDER: &str = "<AssertPlaceHolder>";

/// Assert call names recognized by the miner, with or without an
/// `Assert.`/`Assertions.` receiver.
pub const ASSERT_NAMES: &[&str] = &[
    "assertEquals",
    "assertTrue",
    "assertFalse",
    "assertNull",
    "assertNotNull",
    "assertSame",
    "assertNotSame",
    "assertThat",
    "assertArrayEquals",
    "fail",
];

const ASSERT_RECEIVERS: &[&str] = &["Assert", "Assertions"];

#[derive(Debug, Error)]
pub enum MiningError {
    #[error(transparent)]
    Java(#[from] java::JavaError),
    #[error("file is not valid UTF-8: {0}")]
    Encoding(PathBuf),
    #[error("could not locate assert statement for replacement in `{0}`")]
    Replacement(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One mined pair: the test with its assert replaced by the placeholder, the
/// focal method, and the assert statement itself. All texts are
/// whitespace-normalized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestAssertPair {
    pub test_with_placeholder: String,
    pub focal_method: String,
    pub assert_stmt: String,
    pub source_text: String,
    pub target_text: String,
    pub origin: (String, String),
}

/// Deterministic train/valid/test partition of a TAP corpus.
#[derive(Debug, Clone)]
pub struct CorpusSplit {
    pub train: Vec<TestAssertPair>,
    pub valid: Vec<TestAssertPair>,
    pub test: Vec<TestAssertPair>,
    pub ratios: (f64, f64, f64),
    pub seed: u64,
}

/// Collapse all whitespace runs to single spaces and trim the ends, matching
/// the single-line rendering the corpus uses.
pub fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parse a Java compilation unit into its classes and methods. Files with
/// syntax errors yield an error, never a partial result.
pub fn parse_java(source: &str) -> Result<Vec<ParsedClass>, MiningError> {
    Ok(parse_compilation_unit(source)?.classes)
}

/// Keep methods annotated `@Test` that contain exactly one assert statement.
pub fn extract_candidates(methods: &[JavaMethod]) -> Vec<JavaMethod> {
    methods
        .iter()
        .filter(|m| m.annotations.iter().any(|a| a == "Test"))
        .filter(|m| assert_statements(m).len() == 1)
        .cloned()
        .collect()
}

/// All assert statements in a method body, in source order.
pub fn assert_statements(method: &JavaMethod) -> Vec<Span> {
    let mut spans = Vec::new();
    if let Some(body) = &method.body {
        body.walk(&mut |stmt: &Stmt| {
            if stmt.kind == StmtKind::Expr
                && is_assert_statement(&method.body_text[stmt.span.start..stmt.span.end])
            {
                spans.push(stmt.span);
            }
        });
    }
    spans
}

/// True when a statement is a recognized assert invocation, optionally
/// qualified (`Assert.assertEquals(..)`, `org.junit.Assert.fail(..)`).
fn is_assert_statement(stmt_text: &str) -> bool {
    let Ok(tokens) = java::lex(stmt_text) else {
        return false;
    };
    // leading identifier chain `a.b.c`
    let mut chain = Vec::new();
    let mut i = 0;
    while i < tokens.len() && tokens[i].is_ident() {
        chain.push(tokens[i].text.as_str());
        if i + 1 < tokens.len() && tokens[i + 1].is_punct(".") {
            i += 2;
        } else {
            i += 1;
            break;
        }
    }
    if chain.is_empty() || i >= tokens.len() || !tokens[i].is_punct("(") {
        return false;
    }
    let name = chain[chain.len() - 1];
    if !ASSERT_NAMES.contains(&name) {
        return false;
    }
    match chain.len() {
        1 => true,
        n => ASSERT_RECEIVERS.contains(&chain[n - 2]),
    }
}

fn is_assert_name(name: &str) -> bool {
    ASSERT_NAMES.contains(&name)
}

/// Index of mined methods keyed by simple name, remembering the defining
/// class and a stable file rank for disambiguation.
#[derive(Debug, Default, Clone)]
pub struct FocalIndex {
    by_name: BTreeMap<String, Vec<IndexedMethod>>,
}

#[derive(Debug, Clone)]
struct IndexedMethod {
    class_name: String,
    rank: usize,
    method: JavaMethod,
}

impl FocalIndex {
    pub fn add_class(&mut self, class: &ParsedClass, rank: usize) {
        for method in &class.methods {
            if method.is_constructor {
                continue;
            }
            self.by_name
                .entry(method.name.clone())
                .or_default()
                .push(IndexedMethod {
                    class_name: class.name.clone(),
                    rank,
                    method: method.clone(),
                });
        }
    }

    fn lookup(&self, name: &str, preferred_class: Option<&str>) -> Option<&JavaMethod> {
        let entries = self.by_name.get(name)?;
        if let Some(pref) = preferred_class {
            if let Some(hit) = entries.iter().find(|e| e.class_name == pref) {
                return Some(&hit.method);
            }
        }
        entries.iter().min_by_key(|e| e.rank).map(|e| &e.method)
    }
}

/// Strip a `Test` prefix or suffix from a test-class name to guess the class
/// under test.
fn class_under_test(test_class: &str) -> Option<String> {
    if let Some(s) = test_class.strip_suffix("Test") {
        if !s.is_empty() {
            return Some(s.to_string());
        }
    }
    if let Some(s) = test_class.strip_prefix("Test") {
        if !s.is_empty() {
            return Some(s.to_string());
        }
    }
    None
}

/// Resolve the focal method: the last non-assert invocation positioned
/// before or within the test's single assert statement, looked up by simple
/// name. `None` marks an unmappable pair.
pub fn resolve_focal<'a>(
    test: &JavaMethod,
    index: &'a FocalIndex,
    test_class: &str,
) -> Option<&'a JavaMethod> {
    let asserts = assert_statements(test);
    let assert_span = *asserts.first()?;
    let last = test
        .invocations
        .iter()
        .filter(|inv| inv.span.start < assert_span.end)
        .rfind(|inv| !is_assert_name(&inv.name))?;
    let preferred = class_under_test(test_class);
    index.lookup(&last.name, preferred.as_deref())
}

/// Build the TAP: replace the assert with the placeholder, normalize, and
/// assemble source/target texts.
pub fn make_tap(
    test: &JavaMethod,
    focal: &JavaMethod,
    origin: (String, String),
) -> Result<TestAssertPair, MiningError> {
    let asserts = assert_statements(test);
    let span = asserts
        .first()
        .copied()
        .ok_or_else(|| MiningError::Replacement(test.name.clone()))?;
    if span.end > test.body_text.len() {
        return Err(MiningError::Replacement(test.name.clone()));
    }
    let mut replaced = String::with_capacity(test.body_text.len());
    replaced.push_str(&test.body_text[..span.start]);
    replaced.push_str(PLACEHOLDER);
    replaced.push(';');
    replaced.push_str(&test.body_text[span.end..]);

    let assert_text = test.body_text[span.start..span.end]
        .trim()
        .trim_end_matches(';')
        .trim_end();
    let test_with_placeholder = normalize_ws(&replaced);
    let focal_method = normalize_ws(&focal.body_text);
    let assert_stmt = normalize_ws(assert_text);
    let source_text = format!("{test_with_placeholder} {focal_method}");
    Ok(TestAssertPair {
        test_with_placeholder,
        focal_method,
        assert_stmt: assert_stmt.clone(),
        source_text,
        target_text: assert_stmt,
        origin,
    })
}

/// Deterministic shuffled partition. Train and test counts round down; the
/// remainder goes to the validation set, which matches the reference corpus
/// arithmetic (188,154 -> 150,523 / 18,816 / 18,815).
pub fn split_corpus(
    taps: Vec<TestAssertPair>,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<CorpusSplit, MiningError> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if taps.is_empty() {
        return Err(MiningError::EmptyCorpus);
    }
    let n = taps.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let n_train = ((n as f64) * ratios.0).floor() as usize;
    let n_test = ((n as f64) * ratios.2).floor() as usize;
    let n_valid = n - n_train - n_test;

    let mut shuffled: Vec<TestAssertPair> = Vec::with_capacity(n);
    let mut taps = taps.into_iter().map(Some).collect::<Vec<_>>();
    for idx in order {
        shuffled.push(taps[idx].take().expect("index visited once"));
    }
    let valid = shuffled.split_off(n_train + n_valid);
    let mid = shuffled.split_off(n_train);
    Ok(CorpusSplit {
        train: shuffled,
        valid: mid,
        test: valid,
        ratios,
        seed,
    })
}

/// Outcome of mining a directory tree: the pairs plus drop accounting.
#[derive(Debug, Default)]
pub struct MiningReport {
    pub taps: Vec<TestAssertPair>,
    pub files_parsed: usize,
    pub files_skipped: usize,
    pub candidates: usize,
    pub unresolved_focal: usize,
}

/// Mine every `.java` file under `src_dir`. Files are visited in
/// lexicographic path order so the output is deterministic. `focal_dir`
/// optionally contributes production classes to the focal-method index.
pub fn mine_directory(
    src_dir: &Path,
    focal_dir: Option<&Path>,
) -> Result<MiningReport, MiningError> {
    let mut report = MiningReport::default();
    let src_files = java_files(src_dir)?;
    let focal_files = match focal_dir {
        Some(d) => java_files(d)?,
        None => Vec::new(),
    };

    // First pass: parse everything and build the focal index over all
    // mined methods.
    let mut parsed: Vec<(PathBuf, Vec<ParsedClass>)> = Vec::new();
    let mut index = FocalIndex::default();
    let mut rank = 0usize;
    for path in src_files.iter().chain(focal_files.iter()) {
        let bytes = fs::read(path)?;
        let source = match String::from_utf8(bytes) {
            Ok(s) => s,
            Err(_) => {
                report.files_skipped += 1;
                continue;
            }
        };
        match parse_java(&source) {
            Ok(classes) => {
                for class in &classes {
                    index.add_class(class, rank);
                }
                rank += 1;
                report.files_parsed += 1;
                if src_files.contains(path) {
                    parsed.push((path.clone(), classes));
                }
            }
            Err(_) => {
                report.files_skipped += 1;
            }
        }
    }

    // Second pass: extract candidates and build pairs.
    for (path, classes) in &parsed {
        for class in classes {
            let candidates = extract_candidates(&class.methods);
            report.candidates += candidates.len();
            for test in &candidates {
                match resolve_focal(test, &index, &class.name) {
                    Some(focal) => {
                        let origin = (path.display().to_string(), test.name.clone());
                        report.taps.push(make_tap(test, focal, origin)?);
                    }
                    None => report.unresolved_focal += 1,
                }
            }
        }
    }
    Ok(report)
}

fn java_files(dir: &Path) -> Result<Vec<PathBuf>, MiningError> {
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(dir)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| p.extension().map(|x| x == "java").unwrap_or(false))
        .collect();
    files.sort();
    Ok(files)
}

/// How the JSONL writer renders the source side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceMode {
    /// `test-with-placeholder + " " + focal-method` (the translation task).
    WithFocal,
    /// Test method only (the auto-completion comparison corpus).
    TestOnly,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TapRecord {
    pub source: String,
    pub target: String,
    pub file: String,
    pub method: String,
}

pub fn write_jsonl(
    pairs: &[TestAssertPair],
    path: &Path,
    mode: SourceMode,
) -> Result<(), MiningError> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    for tap in pairs {
        let source = match mode {
            SourceMode::WithFocal => tap.source_text.clone(),
            SourceMode::TestOnly => tap.test_with_placeholder.clone(),
        };
        let record = TapRecord {
            source,
            target: tap.target_text.clone(),
            file: tap.origin.0.clone(),
            method: tap.origin.1.clone(),
        };
        serde_json::to_writer(&mut w, &record).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<TapRecord>, MiningError> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(std::io::Error::other)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BITSET_TEST_CLASS: &str = r#"
public class ImmutableBitSetTest {
    @Test
    public void testLength() {
        BitSet bset = new BitSet();
        ImmutableBitSet ibset = new ImmutableBitSet(bset);
        Assert.assertEquals(bset.length(), ibset.length());
    }
}
"#;

    const BITSET_FOCAL_CLASS: &str = r#"
public class ImmutableBitSet {
    public int length() {
        return this.bitSet.length();
    }
}
"#;

    const BITSET_SOURCE: &str = "public void testLength() { BitSet bset = new BitSet(); \
ImmutableBitSet ibset = new ImmutableBitSet(bset); <AssertPlaceHolder>; } \
public int length() { return this.bitSet.length(); }";

    const BITSET_TARGET: &str = "Assert.assertEquals(bset.length(), ibset.length())";

    fn bitset_setup() -> (JavaMethod, FocalIndex) {
        let test_classes = parse_java(BITSET_TEST_CLASS).unwrap();
        let focal_classes = parse_java(BITSET_FOCAL_CLASS).unwrap();
        let mut index = FocalIndex::default();
        for c in test_classes.iter().chain(focal_classes.iter()) {
            index.add_class(c, 0);
        }
        let test = test_classes[0].methods[0].clone();
        (test, index)
    }

    #[test]
    fn candidates_require_test_annotation_and_single_assert() {
        let src = r#"
class T {
    @Test public void one() { Assert.assertTrue(x); }
    @Test public void two() { assertTrue(x); assertFalse(y); }
    public void plain() { assertTrue(x); }
}
"#;
        let classes = parse_java(src).unwrap();
        let kept = extract_candidates(&classes[0].methods);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].name, "one");
    }

    #[test]
    fn focal_resolves_to_last_invocation_inside_assert() {
        let (test, index) = bitset_setup();
        let focal = resolve_focal(&test, &index, "ImmutableBitSetTest").unwrap();
        assert_eq!(focal.name, "length");
        assert!(focal.body_text.contains("this.bitSet.length()"));
    }

    #[test]
    fn constructor_only_test_is_unmappable() {
        let src = r#"
class CtorTest {
    @Test public void makes() {
        Thing t = new Thing();
        Assert.assertNotNull(t);
    }
}
"#;
        let classes = parse_java(src).unwrap();
        let mut index = FocalIndex::default();
        index.add_class(&classes[0], 0);
        let cands = extract_candidates(&classes[0].methods);
        assert_eq!(cands.len(), 1);
        assert!(resolve_focal(&cands[0], &index, "CtorTest").is_none());
    }

    #[test]
    fn chained_call_focal_is_lexically_last() {
        let src = r#"
class ChainTest {
    @Test public void chained() {
        assertEquals(1, a.b().c());
    }
    int b() { return 0; }
    int c() { return 1; }
}
"#;
        let classes = parse_java(src).unwrap();
        let mut index = FocalIndex::default();
        index.add_class(&classes[0], 0);
        let cands = extract_candidates(&classes[0].methods);
        let focal = resolve_focal(&cands[0], &index, "ChainTest").unwrap();
        assert_eq!(focal.name, "c");
    }

    #[test]
    fn bitset_tap_matches_reference_rendering() {
        let (test, index) = bitset_setup();
        let focal = resolve_focal(&test, &index, "ImmutableBitSetTest").unwrap();
        let tap = make_tap(&test, focal, ("f".into(), "testLength".into())).unwrap();
        assert_eq!(tap.source_text, BITSET_SOURCE);
        assert_eq!(tap.target_text, BITSET_TARGET);
        assert_eq!(tap.test_with_placeholder.matches(PLACEHOLDER).count(), 1);
    }

    #[test]
    fn multiline_assert_replacement_removes_all_asserts() {
        let src = r#"
class MultiTest {
    @Test public void spread() {
        helper();
        assertEquals(
            expected,
            actual
        );
    }
    void helper() { }
}
"#;
        let classes = parse_java(src).unwrap();
        let mut index = FocalIndex::default();
        index.add_class(&classes[0], 0);
        let cands = extract_candidates(&classes[0].methods);
        let focal = resolve_focal(&cands[0], &index, "MultiTest").unwrap();
        let tap = make_tap(&cands[0], focal, ("f".into(), "spread".into())).unwrap();
        // re-parse with the placeholder masked to a dummy call: no asserts left
        let masked = tap.test_with_placeholder.replace(PLACEHOLDER, "noop()");
        let method = crate::java::parse_method_source(&masked).unwrap();
        assert_eq!(assert_statements(&method).len(), 0);
        assert!(tap.target_text.starts_with("assertEquals"));
        assert!(!tap.target_text.ends_with(';'));
    }

    #[test]
    fn split_reproduces_reference_counts() {
        let dummy = TestAssertPair {
            test_with_placeholder: String::new(),
            focal_method: String::new(),
            assert_stmt: String::new(),
            source_text: String::new(),
            target_text: String::new(),
            origin: (String::new(), String::new()),
        };
        let taps = vec![dummy; 188_154];
        let split = split_corpus(taps, (0.80, 0.10, 0.10), 7).unwrap();
        assert_eq!(split.train.len(), 150_523);
        assert_eq!(split.valid.len(), 18_816);
        assert_eq!(split.test.len(), 18_815);
    }

    #[test]
    fn split_small_corpus_and_determinism() {
        let mk = |i: usize| TestAssertPair {
            test_with_placeholder: format!("t{i}"),
            focal_method: String::new(),
            assert_stmt: String::new(),
            source_text: format!("s{i}"),
            target_text: format!("a{i}"),
            origin: (String::new(), String::new()),
        };
        let taps: Vec<_> = (0..10).map(mk).collect();
        let a = split_corpus(taps.clone(), (0.80, 0.10, 0.10), 42).unwrap();
        assert_eq!((a.train.len(), a.valid.len(), a.test.len()), (8, 1, 1));
        let b = split_corpus(taps, (0.80, 0.10, 0.10), 42).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.valid, b.valid);
        assert_eq!(a.test, b.test);
        assert!(split_corpus(Vec::new(), (0.8, 0.1, 0.1), 1).is_err());
    }

    #[test]
    fn resolve_focal_is_pure() {
        let (test, index) = bitset_setup();
        let a = resolve_focal(&test, &index, "ImmutableBitSetTest").map(|m| m.name.clone());
        let b = resolve_focal(&test, &index, "ImmutableBitSetTest").map(|m| m.name.clone());
        assert_eq!(a, b);
    }

    #[test]
    fn ambiguity_prefers_class_under_test() {
        let src = r#"
class Alpha { int size() { return 1; } }
class Beta { int size() { return 2; } }
class BetaTest {
    @Test public void testSize() {
        assertEquals(2, beta.size());
    }
}
"#;
        let classes = parse_java(src).unwrap();
        let mut index = FocalIndex::default();
        for c in &classes {
            index.add_class(c, 0);
        }
        let test_class = classes.iter().find(|c| c.name == "BetaTest").unwrap();
        let cands = extract_candidates(&test_class.methods);
        let focal = resolve_focal(&cands[0], &index, "BetaTest").unwrap();
        assert!(focal.body_text.contains("return 2"));
    }
}
