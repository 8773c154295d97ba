//! Segment the example sentence with four fixture vocabularies and count
//! non-first tokens for each.

use codemix::subword::{load_vocab, nft_analysis_text, tokenize_word, word_tokenize, Scheme};

const SENTENCE: &str = "Since I started working ya ni disfruto la vida lol";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rows = [
        ("english_wp", Scheme::ContinuationPrefix),
        ("spanish_wp", Scheme::ContinuationPrefix),
        ("multilingual_wp", Scheme::ContinuationPrefix),
        ("xlmr_sp", Scheme::WordInitialMarker),
    ];
    let words = word_tokenize(SENTENCE);
    println!("{} words: {SENTENCE}", words.len());
    for (i, (name, scheme)) in rows.iter().enumerate() {
        let path = format!("{}/fixtures/{name}.vocab", env!("CARGO_MANIFEST_DIR"));
        let vocab = load_vocab(&std::fs::read_to_string(path)?, *scheme)?;
        let pieces: Vec<String> = words.iter().flat_map(|w| tokenize_word(&vocab, w)).collect();
        let nft = nft_analysis_text(&vocab, SENTENCE);
        println!("{} {name} ({} non-first): {}", i + 1, nft.non_first_tokens, pieces.join(" "));
    }
    Ok(())
}
