//! Generate a synthetic code-mixed corpus and check that its planted
//! sentiment words carry the labels.

use codemix::corpus::{corpus_stats, serialize_corpus, SentimentLabel};
use codemix::synthetic::{generate, SyntheticParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = SyntheticParams { size: 1000, seed: 7, ..Default::default() };
    let corpus = generate(&params)?;
    println!("{:?}", corpus_stats(&corpus));

    let lexicon: Vec<(SentimentLabel, Vec<&str>)> =
        [SentimentLabel::Negative, SentimentLabel::Positive].iter().map(|&l| (l, params.sentiment_lexicon(l))).collect();
    let mut right = 0;
    for t in &corpus.tweets {
        let votes: Vec<usize> = lexicon.iter().map(|(_, words)| t.words().filter(|w| words.contains(w)).count()).collect();
        let guess = match votes[0].cmp(&votes[1]) {
            std::cmp::Ordering::Greater => SentimentLabel::Negative,
            std::cmp::Ordering::Less => SentimentLabel::Positive,
            std::cmp::Ordering::Equal => SentimentLabel::Neutral,
        };
        right += usize::from(guess == t.sentiment);
    }
    println!("token-counting accuracy {:.3}", right as f64 / corpus.len() as f64);
    print!("{}", serialize_corpus(&codemix::corpus::Corpus { tweets: corpus.tweets[..2].to_vec(), provenance: String::new() }));
    Ok(())
}
