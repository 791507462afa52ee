//! Metric demo: top-k accuracy, BLEU4, and syntactic correctness over a toy
//! candidate table, rendered the way the evaluation report prints.
//!
//! Run with: cargo run --example score_candidates

use assert_forge::evaluation::{bleu4, evaluate, render_report, syntax_check, Smoothing};

fn main() -> anyhow::Result<()> {
    let candidates = vec![
        vec![
            "assertEquals(expected, result)".to_string(),
            "assertSame(expected, result)".to_string(),
        ],
        vec![
            "assertTrue(list.contains(element))".to_string(),
            "assertFalse(list.contains(element))".to_string(),
        ],
        vec![
            "assertNotNull(client".to_string(), // syntactically broken
            "assertNotNull(client)".to_string(),
        ],
    ];
    let targets = vec![
        "assertEquals(expected, result)".to_string(),
        "assertFalse(list.contains(element))".to_string(),
        "assertNull(client)".to_string(),
    ];

    let report = evaluate(&candidates, &targets, Some(0.42))?;
    print!("{}", render_report(&report));

    let cand: Vec<&str> = "a b c d e".split_whitespace().collect();
    let reference: Vec<&str> = "a b c d f".split_whitespace().collect();
    println!(
        "\nsentence BLEU4 of near-miss pair: {:.2}",
        bleu4(&cand, &reference, Smoothing::None)?
    );
    println!(
        "syntax_check(\"assertTrue(( status == 0\") = {}",
        syntax_check("assertTrue(( status == 0")
    );
    Ok(())
}
