//! Train the desk-scale transformer until it memorizes a handful of
//! synthetic Test-Assert Pairs, then decode them back.
//!
//! Run with: cargo run --release --example memorize_pairs

use assert_forge::evaluation::normalize_for_match;
use assert_forge::generation::{generate_top_k, GenerationConfig};
use assert_forge::model::{ModelConfig, Parameters};
use assert_forge::textprep::train_vocab;
use assert_forge::training::{
    build_micro_batches, examples_from_text_pairs, step_once, OptimizerConfig, OptimizerState,
};

fn main() -> anyhow::Result<()> {
    let pairs: Vec<(String, String)> = (0..8)
        .map(|i| {
            let value = 2 + i;
            (
                format!(
                    "public void testGet{i}() {{ Holder h = new Holder(); <AssertPlaceHolder>; }} \
public int get{i}() {{ return {value}; }}"
                ),
                format!("assertEquals({value}, h.get{i}())"),
            )
        })
        .collect();
    let corpus: Vec<String> = pairs
        .iter()
        .flat_map(|(s, t)| [s.clone(), t.clone()])
        .collect();
    let vocab = train_vocab(corpus.iter(), 400)?;
    let cfg = ModelConfig {
        max_len: 96,
        ..ModelConfig::desk(vocab.size())
    };
    let examples = examples_from_text_pairs(&pairs, &vocab, cfg.max_len);

    let mut params = Parameters::<f32>::init(&cfg, 11);
    let mut state = OptimizerState::new(&cfg);
    let opt = OptimizerConfig {
        base_lr: 2e-3,
        warmup_steps: 20,
        accum_freq: 2,
        ..OptimizerConfig::default()
    };
    let mut loss = f64::INFINITY;
    'training: for epoch in 0..400 {
        let chunks = build_micro_batches(&examples, 4, 0, epoch);
        let views: Vec<Vec<_>> = chunks
            .iter()
            .map(|c| c.iter().map(|&i| examples[i].clone()).collect())
            .collect();
        for group in views.chunks(opt.accum_freq) {
            let refs: Vec<&[_]> = group.iter().map(|v| v.as_slice()).collect();
            loss = step_once(&cfg, &mut params, &mut state, &opt, &refs)?;
            if state.step % 25 == 0 {
                println!("step {:>4}  train loss {loss:.4}", state.step);
            }
            if loss < 0.05 {
                break 'training;
            }
        }
    }
    println!("stopped at step {} with loss {loss:.4}\n", state.step);

    let gen_cfg = GenerationConfig {
        beam_width: 4,
        k: 1,
        max_decode_len: 32,
        length_penalty: 0.0,
    };
    for (src, tgt) in &pairs {
        let cands = generate_top_k(&cfg, &params, src, &vocab, &gen_cfg)?;
        let hit = cands
            .first()
            .map(|c| normalize_for_match(c) == normalize_for_match(tgt))
            .unwrap_or(false);
        println!(
            "{} {}",
            if hit { "ok " } else { "MISS" },
            cands.first().cloned().unwrap_or_default()
        );
    }
    Ok(())
}
