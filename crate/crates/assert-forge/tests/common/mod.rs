//! Shared fixtures for the integration suites: reference assert strings,
//! the bundled repository paths, and synthetic corpus generators.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn repo_dir() -> PathBuf {
    fixture_dir().join("repo")
}

pub fn evosuite_dir() -> PathBuf {
    fixture_dir().join("evosuite")
}

pub fn focal_dir() -> PathBuf {
    fixture_dir().join("focal")
}

/// The reference TAP rendering for the bundled bitset test.
pub const BITSET_SOURCE: &str = "public void testLength() { BitSet bset = new BitSet(); \
ImmutableBitSet ibset = new ImmutableBitSet(bset); <AssertPlaceHolder>; } \
public int length() { return this.bitSet.length(); }";

pub const BITSET_TARGET: &str = "Assert.assertEquals(bset.length(), ibset.length())";

/// Reference asserts: common, complex, and equivalent-pair examples plus the
/// two complete-example targets.
pub const REFERENCE_ASSERTS: &[&str] = &[
    // common
    "assertEquals(expected, result)",
    "assertSame(rows, actual)",
    "assertNotNull(client)",
    "assertTrue(list.contains(element))",
    "assertArrayEquals(expected, values)",
    "assertEquals(1, result.getSize())",
    // complex
    "assertEquals(0, zero.getPartialDerivative(n), epsilon [ n ])",
    "assertThat(emptySession.getEnd(), CoreMatchers.equalTo(date))",
    "assertEquals(container.getSoundEffects().read(0), Sound.ENTITY_CAT_HISS)",
    // equivalent pairs (target then prediction)
    "assertNull(sm.get(serviceStub.getClass()))",
    "assertNull(sm.get(AbstractService.class))",
    "assertTrue( status == 0)",
    "assertEquals(0, status)",
    "assertEquals(user.getSNetVisibility(), visibility)",
    "assertEquals(visibility, user.getSNetVisibility())",
    "assertTrue( ps1 == ps2)",
    "assertSame(ps1, ps2)",
    // complete examples
    "Assert.assertTrue( event instanceof BeginNwhinInvocationEvent)",
    "Assert.assertTrue(lru.exists( 100 + i))",
    BITSET_TARGET,
];

/// Hand-corrupted variants that must fail the syntax check.
pub const CORRUPTED_ASSERTS: &[&str] = &[
    "assertTrue(( status == 0",
    "assertEquals(bset.length(), ibset.length()))",
    "assertEquals(, status)",
    "assertNull(sm.get(AbstractService.class)",
    "assertSame(ps1 ps2)",
    "assertTrue(list.contains(element).)",
    "assertEquals(\"unterminated, x)",
    "assertArrayEquals(expected values)",
    "assertEquals(0, zero.getPartialDerivative(n), epsilon [ n)",
    "assertTrue(event instanceof )",
];

/// The generated-assert list for the augmentation experiment, keyed by the
/// fixture test method each one lands in. `None` is the no-usable-candidate
/// row.
pub fn augmentation_asserts() -> Vec<(&'static str, Option<&'static str>)> {
    vec![
        (
            "testToInt",
            Some("assertEquals(5, NumberUtils.toInt(\"5\"))"),
        ),
        (
            "testToLong",
            Some("assertEquals(1, NumberUtils.toLong(\"1\", 1))"),
        ),
        (
            "testToFloat",
            Some("assertEquals(6, NumberUtils.toFloat(\"6\", 6), 0);"),
        ),
        (
            "testToDouble",
            Some("assertNotNull(NumberUtils.toDouble(\"foo\", 1.0));"),
        ),
        (
            "testToByte",
            Some("assertEquals(1, NumberUtils.toByte(\"1\",(( byte)(1))));"),
        ),
        (
            "testToShort",
            Some("assertEquals(15, NumberUtils.toShort(\"15\",(( short)(15))));"),
        ),
        (
            "testCreateFloat",
            Some("assertNotNull(NumberUtils.createFloat(\"1\"))"),
        ),
        (
            "testCreateDouble",
            Some("assertNotNull(NumberUtils.createDouble(\"1\"));"),
        ),
        (
            "testCreateInteger",
            Some("assertNotNull(NumberUtils.createInteger(\"1\"));"),
        ),
        (
            "testCreateLong",
            Some("assertNotNull(NumberUtils.createLong(\"1\"));"),
        ),
        (
            "testCreateBigInteger",
            Some("assertEquals(BigInteger.valueOf(1), NumberUtils.createBigInteger(\"1\"));"),
        ),
        ("testCreateBigDecimal", None),
        ("testMinLongArray", Some("assertNotNull(long0);")),
        (
            "testMinIntInt",
            Some("assertEquals(4, NumberUtils.min(4, 5, 7));"),
        ),
        ("testMaxFloatArray", Some("assertTrue(( float0 == 0.0F));")),
        ("testMaxByte", Some("assertTrue(( byte0 == 5));")),
        (
            "testIsDigits",
            Some("assertTrue(NumberUtils.isDigits(\"1\"));"),
        ),
        (
            "testIsNumber",
            Some("assertTrue(NumberUtils.isNumber(\"1\"))"),
        ),
    ]
}

const TYPES: &[&str] = &[
    "Counter", "Stack", "Queue", "Buffer", "Window", "Cursor", "Ledger", "Meter",
];
const METHODS: &[&str] = &[
    "getValue", "size", "count", "depth", "capacity", "total", "index", "weight",
];

/// Deterministic synthetic Test-Assert Pairs: the focal method returns a
/// literal and the target assert checks it through the accessor. The
/// mapping is learnable from the source alone, so a correct trainer can
/// memorize a small sample quickly.
pub fn synthetic_taps(n: usize, seed: u64) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let ty = TYPES[rng.gen_range(0..TYPES.len())];
        let method = METHODS[rng.gen_range(0..METHODS.len())];
        let value = rng.gen_range(0..10);
        let source = format!(
            "public void test{ty}{i}() {{ {ty} v = new {ty}(); <AssertPlaceHolder>; }} \
public int {method}() {{ return {value}; }}"
        );
        let target = format!("assertEquals({value}, v.{method}())");
        out.push((source, target));
    }
    out
}

/// A disjoint validation sample: different surface pattern (assertTrue over
/// a comparison), so it is not memorizable from the training sample.
pub fn synthetic_taps_heldout(n: usize, seed: u64) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD_EF01);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let ty = TYPES[rng.gen_range(0..TYPES.len())];
        let method = METHODS[rng.gen_range(0..METHODS.len())];
        let value = rng.gen_range(10..20);
        let source = format!(
            "public void check{ty}{i}() {{ {ty} w = build(); <AssertPlaceHolder>; }} \
public int {method}() {{ return {value}; }}"
        );
        let target = format!("assertTrue(w.{method}() == {value})");
        out.push((source, target));
    }
    out
}

/// Documents for code-mode pretraining, drawn from the same surface
/// distribution as the synthetic pairs but laid out as plain methods.
pub fn synthetic_code_docs(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5151_0101);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let ty = TYPES[rng.gen_range(0..TYPES.len())];
        let method = METHODS[rng.gen_range(0..METHODS.len())];
        let other = METHODS[rng.gen_range(0..METHODS.len())];
        let value = rng.gen_range(0..10);
        let doc = format!(
            "public int {method}() {{ return {value}; }} \
public void use{ty}{i}() {{ {ty} v = new {ty}(); assertEquals({value}, v.{method}()); }} \
public int {other}() {{ return {value}; }}"
        );
        out.push(doc);
    }
    out
}
