//! Mine Test-Assert Pairs from the bundled fixture repository and print the
//! parallel corpus.
//!
//! Run with: cargo run --example mine_pairs

use std::path::PathBuf;

use assert_forge::mining::{mine_directory, split_corpus};

fn main() -> anyhow::Result<()> {
    let repo = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/repo");
    let report = mine_directory(&repo, None)?;
    println!(
        "parsed {} files ({} skipped), {} candidate tests, {} unmappable",
        report.files_parsed, report.files_skipped, report.candidates, report.unresolved_focal
    );
    for tap in &report.taps {
        println!("\n== {} ({})", tap.origin.1, tap.origin.0);
        println!("source: {}", tap.source_text);
        println!("target: {}", tap.target_text);
    }
    let n = report.taps.len();
    let split = split_corpus(report.taps, (0.80, 0.10, 0.10), 7)?;
    println!(
        "\nsplit {} pairs into {} train / {} valid / {} test",
        n,
        split.train.len(),
        split.valid.len(),
        split.test.len()
    );
    Ok(())
}
