//! Train the small transformer on a synthetic corpus and report dev metrics.

use codemix::corpus::split_corpus;
use codemix::evaluation::{confusion, metrics};
use codemix::models::ModelConfig;
use codemix::subword::Scheme;
use codemix::synthetic::{generate, synthetic_vocab, SyntheticParams};
use codemix::training::{predict_transformer, train_transformer, Objective, TrainPlan};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = SyntheticParams { size: 600, seed: 1, ..Default::default() };
    let corpus = generate(&params)?;
    let (train, dev) = split_corpus(&corpus, 0.9, 0)?;
    let vocab = synthetic_vocab(&params, Scheme::ContinuationPrefix)?;
    let config = ModelConfig::desk(vocab.len());
    let plan = TrainPlan { epochs: 4, batch_size: 16, ..TrainPlan::desk(Objective::Cls) };

    let (log, model) = train_transformer(&plan, &train, &dev, &vocab, &config, None)?;
    for e in &log.epochs {
        let f1 = e.dev.as_ref().and_then(|d| d.weighted_f1).unwrap_or(f64::NAN);
        println!("epoch {}: loss {:.4}, dev weighted F1 {:.3}", e.epoch, e.mean_loss, f1);
    }
    let pred = predict_transformer(&model, &vocab, &dev.tweets)?;
    let report = metrics(&confusion(&dev.labels(), &pred)?)?;
    println!("best epoch {}: P {:.3} R {:.3} F1 {:.3}", log.best_epoch, report.weighted_precision, report.weighted_recall, report.weighted_f1);
    Ok(())
}
