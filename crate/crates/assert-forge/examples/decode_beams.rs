//! Beam-search decoding on a tiny randomly initialized model, showing the
//! ranked hypothesis list and the length-penalty effect.
//!
//! Run with: cargo run --example decode_beams

use assert_forge::generation::{beam_search, GenerationConfig};
use assert_forge::model::{ModelConfig, Parameters};
use assert_forge::textprep::EOS;

fn main() -> anyhow::Result<()> {
    let cfg = ModelConfig::tiny(6);
    let params = Parameters::<f32>::init(&cfg, 99);
    let src = vec![3, 4, EOS];

    for alpha in [0.0, 0.6] {
        let gen_cfg = GenerationConfig {
            beam_width: 6,
            k: 6,
            max_decode_len: 4,
            length_penalty: alpha,
        };
        let beams = beam_search(&cfg, &params, &src, &gen_cfg)?;
        println!("alpha = {alpha}");
        for (rank, hyp) in beams.iter().enumerate() {
            println!(
                "  #{rank}  ids {:?}  logprob {:.4}  score {:.4}  finished {}",
                hyp.content(),
                hyp.logprob,
                hyp.normalized_score,
                hyp.finished
            );
        }
    }
    Ok(())
}
