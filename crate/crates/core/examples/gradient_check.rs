//! Finite-difference check of every transformer and BLSTM parameter.

use codemix::models::{encode_batch, encode_words, BlstmConfig, BlstmModel, ModelConfig, ModelError, TransformerModel, WordVocab};
use codemix::subword::Scheme;
use codemix::synthetic::{generate, synthetic_vocab, SyntheticParams};
use codemix::tensor::{gradcheck, TensorError};
use codemix::training::apply_mlm_masking;

fn tensor(e: ModelError) -> TensorError {
    match e {
        ModelError::Tensor(t) => t,
        other => panic!("{other}"),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = SyntheticParams { size: 3, seed: 1, neutral_words: 4, sentiment_words: 2, ..Default::default() };
    let data = generate(&params)?;
    let vocab = synthetic_vocab(&params, Scheme::ContinuationPrefix)?;

    let config = ModelConfig { max_seq_len: 8, ..ModelConfig::desk(vocab.len()) };
    let model = TransformerModel::new(config, 0)?;
    let batch = apply_mlm_masking(&encode_batch(&vocab, &data.tweets, 8), &vocab, 0.3, 0)?;
    let report = gradcheck(model.params(), |_| true, |tape, vars| {
        let (_, cls) = model.classify_loss(tape, vars, &batch, None).map_err(tensor)?;
        let (_, mlm) = model.mlm_graph(tape, vars, &batch, None).map_err(tensor)?;
        tape.add(cls, mlm)
    })?;
    println!("transformer: {report:?}");

    let words = WordVocab::build(&data, 1);
    let blstm = BlstmModel::new(BlstmConfig::desk(words.len()), 0)?;
    let batch = encode_words(&words, &data.tweets.iter().collect::<Vec<_>>(), 8);
    let report = gradcheck(blstm.params(), |_| true, |tape, vars| {
        Ok(blstm.classify_loss(tape, vars, &batch).map_err(tensor)?.1)
    })?;
    println!("blstm: {report:?}");
    Ok(())
}
