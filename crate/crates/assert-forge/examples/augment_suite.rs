//! Insert generated asserts into the bundled generated-style test fixtures
//! and show the selection filter at work.
//!
//! Run with: cargo run --example augment_suite

use std::path::PathBuf;

use assert_forge::augmentation::augment_test;
use assert_forge::mining::parse_java;

fn main() -> anyhow::Result<()> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let tests = std::fs::read_to_string(fixtures.join("evosuite/NumberUtils_ESTest.java"))?;
    let focal = std::fs::read_to_string(fixtures.join("focal/NumberUtils.java"))?;
    let classes = parse_java(&tests)?;

    let cases = [
        (
            "testToInt",
            vec![
                "assertEquals(5, unknownVar.size())", // out-of-scope identifier
                "assertEquals(5, NumberUtils.toInt(\"5\"))",
            ],
        ),
        ("testMinLongArray", vec!["assertNotNull(long0);"]),
        (
            "testIsNumber",
            vec!["assertTrue(NumberUtils.isNumber(\"1\"))"],
        ),
        ("testCreateBigDecimal", vec!["assertTrue(("]), // all rejected
    ];

    for (method_name, candidates) in cases {
        let method = classes[0]
            .methods
            .iter()
            .find(|m| m.name == method_name)
            .expect("fixture method");
        let candidates: Vec<String> = candidates.iter().map(|s| s.to_string()).collect();
        let result = augment_test(&method.body_text, &candidates, &focal)?;
        println!("== {method_name}");
        for (cand, why) in &result.rejected {
            println!("  rejected `{cand}`: {why}");
        }
        match &result.augmented_test {
            Some(out) => println!("  augmented:\n{}\n", indent(out)),
            None => println!("  no usable candidate\n"),
        }
    }
    Ok(())
}

fn indent(s: &str) -> String {
    s.lines()
        .map(|l| format!("    {l}"))
        .collect::<Vec<_>>()
        .join("\n")
}
