//! Train a byte-level BPE vocabulary on a small code corpus and round-trip
//! some text through it.
//!
//! Run with: cargo run --example train_vocabulary

use assert_forge::textprep::{decode, encode, train_vocab};

fn main() -> anyhow::Result<()> {
    let corpus = [
        "public void testLength() { assertEquals(bset.length(), ibset.length()); }",
        "public int length() { return this.bitSet.length(); }",
        "public void testAdd() { assertTrue(list.add(element)); }",
    ];
    let vocab = train_vocab(corpus, 320)?;
    println!(
        "vocabulary: {} tokens, {} learned merges, digest {}",
        vocab.size(),
        vocab.merges().len(),
        &vocab.digest()[..12]
    );

    let text = "assertEquals(bset.length(), ibset.length())";
    let seq = encode(text, &vocab);
    println!("\n{} bytes -> {} tokens", text.len(), seq.ids.len());
    println!("ids: {:?}", &seq.ids[..seq.ids.len().min(16)]);
    let back = decode(&seq.ids, &vocab);
    println!("round-trip: {back}");
    assert_eq!(back, text);

    let with_placeholder = "foo(); <AssertPlaceHolder>;";
    let seq = encode(with_placeholder, &vocab);
    println!(
        "\nplaceholder encodes to one reserved id: {:?}",
        seq.ids
            .iter()
            .filter(|&&i| i == assert_forge::textprep::PLACEHOLDER_ID)
            .count()
    );
    Ok(())
}
