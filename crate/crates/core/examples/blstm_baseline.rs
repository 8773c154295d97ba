//! The BLSTM baseline over stacked English/Spanish word embeddings.
//!
//! Trained from random embeddings it learns slowly; pretrained vectors can be
//! loaded with `BlstmModel::load_word_vectors`.

use codemix::corpus::split_corpus;
use codemix::models::BlstmConfig;
use codemix::synthetic::{generate, SyntheticParams};
use codemix::training::{train_blstm, TrainPlan};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate(&SyntheticParams { size: 2000, seed: 2, ..Default::default() })?;
    let (train, dev) = split_corpus(&corpus, 0.9, 0)?;
    let plan = TrainPlan { epochs: 25, ..TrainPlan::blstm() };
    let (log, model, words) = train_blstm(&plan, &train, &dev, &BlstmConfig::desk(0), None)?;
    println!("{} words, {} parameters", words.len(), model.config().parameter_count());
    for e in &log.epochs {
        let dev = e.dev.as_ref().unwrap();
        println!("epoch {}: loss {:.4}, dev F1 {:.3}", e.epoch, e.mean_loss, dev.weighted_f1.unwrap());
    }
    Ok(())
}
