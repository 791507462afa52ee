//! Show the two denoising corruptions: span masking + sentence permutation
//! for English text, token deletion + document rotation for code.
//!
//! Run with: cargo run --example corrupt_corpus

use assert_forge::noising::{make_denoising_pair, rng_for_doc, CorruptionConfig};
use assert_forge::textprep::{decode, encode, train_vocab};

fn main() -> anyhow::Result<()> {
    let english = "the quick brown fox jumps over the lazy dog. \
a stitch in time saves nine. practice makes perfect.";
    let code = "public int length() { return this.bitSet.length(); }";
    let vocab = train_vocab([english, code], 280)?;

    let doc = encode(english, &vocab);
    let cfg = CorruptionConfig::english(42);
    let mut rng = rng_for_doc(cfg.seed, 0);
    let (src, tgt) = make_denoising_pair(&doc, &vocab, &cfg, 512, &mut rng);
    println!("english mode (mask spans, permute sentences)");
    println!("  clean : {}", decode(&tgt.ids, &vocab));
    println!("  noised: {}", decode(&src.ids, &vocab));

    let doc = encode(code, &vocab);
    let cfg = CorruptionConfig::code(42);
    let mut rng = rng_for_doc(cfg.seed, 1);
    let (src, tgt) = make_denoising_pair(&doc, &vocab, &cfg, 512, &mut rng);
    println!("\ncode mode (delete tokens, rotate document)");
    println!("  clean : {}", decode(&tgt.ids, &vocab));
    println!("  noised: {}", decode(&src.ids, &vocab));
    Ok(())
}
