//! Parse a corpus file, print its statistics and a seeded 90/10 split.
//!
//! cargo run --example corpus_stats -- [path/to/corpus.conll]

use codemix::corpus::{corpus_stats, parse_corpus, split_corpus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/mixed_sentence.conll").to_string());
    let corpus = parse_corpus(&std::fs::read_to_string(&path)?)?;
    let stats = corpus_stats(&corpus);
    println!("{path}: {} tweets, {} tokens", stats.tweet_count, stats.token_count);
    for (label, n) in &stats.sentiment_counts {
        println!("  {label:<9} {n}");
    }
    for (tag, n) in stats.tag_counts.iter().filter(|(_, &n)| n > 0) {
        println!("  {tag:<9} {n}");
    }
    if corpus.len() >= 2 {
        let (train, dev) = split_corpus(&corpus, 0.9, 0)?;
        println!("split: {} train / {} dev", train.len(), dev.len());
    }
    Ok(())
}
