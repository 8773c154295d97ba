//! Masked-LM training on the task corpus followed by classification
//! fine-tuning, next to the same fine-tuning from random weights.

use codemix::corpus::split_corpus;
use codemix::models::ModelConfig;
use codemix::subword::Scheme;
use codemix::synthetic::{generate, synthetic_vocab, SyntheticParams};
use codemix::training::{train_transformer, two_step_finetune, Objective, TrainPlan};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = SyntheticParams { size: 500, seed: 4, ..Default::default() };
    let (train, dev) = split_corpus(&generate(&params)?, 0.8, 0)?;
    let vocab = synthetic_vocab(&params, Scheme::ContinuationPrefix)?;
    let config = ModelConfig::desk(vocab.len());
    let plan_lm = TrainPlan { epochs: 3, ..TrainPlan::desk(Objective::Mlm) };
    let plan_cls = TrainPlan { epochs: 2, ..TrainPlan::desk(Objective::Cls) };

    let out = std::env::temp_dir().join("codemix-two-step");
    let two = two_step_finetune(&plan_lm, &plan_cls, &train, &dev, &vocab, &config, Some(&out))?;
    for e in &two.lm.epochs {
        println!("mlm epoch {}: loss {:.4}", e.epoch, e.mean_loss);
    }
    println!("step-1 encoder digest {}", &two.step1_digest[..16]);
    let (random, _) = train_transformer(&plan_cls, &train, &dev, &vocab, &config, None)?;
    for (a, b) in two.cls.epochs.iter().zip(&random.epochs) {
        let f1 = |e: &codemix::training::EpochLog| e.dev.as_ref().and_then(|d| d.weighted_f1).unwrap_or(f64::NAN);
        println!(
            "cls epoch {}: two-step loss {:.4} F1 {:.3} | random loss {:.4} F1 {:.3}",
            a.epoch,
            a.mean_loss,
            f1(a),
            b.mean_loss,
            f1(b)
        );
    }
    println!("checkpoints under {}", out.display());
    Ok(())
}
