use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{apply_mlm_masking, sgd_step, InitSource, Objective, OptimizerKind, OptimizerState, TrainError, TrainPlan};
use crate::corpus::{Corpus, SentimentLabel, Tweet};
use crate::evaluation::{confusion, metrics};
use crate::models::{
    encode_batch, encode_words, is_encoder_param, BlstmConfig, BlstmModel, EncodedBatch, ModelConfig, TransformerModel,
    WordBatch, WordVocab,
};
use crate::subword::SubwordVocab;
use crate::tensor::{Checkpoint, ParamSet, Tape, Tensor};

pub const RUN_LOG_SCHEMA_VERSION: u32 = 1;
const CHECKPOINT_FILE: &str = "checkpoint.json";
const RUN_LOG_FILE: &str = "run_log.json";
const EVAL_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Transformer,
    Blstm,
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "transformer" => Ok(ModelKind::Transformer),
            "blstm" => Ok(ModelKind::Blstm),
            other => Err(format!("unknown model `{other}` (expected transformer or blstm)")),
        }
    }
}

/// Dev-set metrics after one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevSnapshot {
    pub weighted_f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub mlm_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub steps: usize,
    pub dev: Option<DevSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub schema_version: u32,
    pub model_kind: ModelKind,
    pub objective: Objective,
    pub seed: u64,
    /// Loss of the first batch, before any update.
    pub initial_loss: f64,
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch whose parameters were retained.
    pub best_epoch: usize,
    pub steps: usize,
    /// Encoder digest after loading the initial checkpoint, when there was one.
    pub init_digest: Option<String>,
    pub final_checkpoint: Option<PathBuf>,
}

/// Model returned by [`train`].
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Transformer(TransformerModel),
    Blstm(BlstmModel, WordVocab),
}

/// Seed of the classification head, shared by every run with the same plan
/// seed regardless of how the encoder was initialized.
pub fn head_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

enum Optimizer {
    Adam(OptimizerState),
    Sgd(f64),
}

impl Optimizer {
    fn new(plan: &TrainPlan, params: &ParamSet) -> Self {
        match plan.optimizer {
            OptimizerKind::Adam => Optimizer::Adam(OptimizerState::new(plan.adam, params)),
            OptimizerKind::Sgd => Optimizer::Sgd(plan.adam.lr),
        }
    }

    fn step(&mut self, params: &mut ParamSet, grads: &[Tensor]) -> Result<(), TrainError> {
        match self {
            Optimizer::Adam(state) => state.adam_step(params, grads)?,
            Optimizer::Sgd(lr) => sgd_step(params, grads, *lr)?,
        }
        Ok(())
    }
}

/// Single-batch update loop around a [`TransformerModel`].
pub struct TransformerTrainer {
    pub model: TransformerModel,
    opt: Optimizer,
    dropout_rng: ChaCha8Rng,
    steps: usize,
}

impl TransformerTrainer {
    pub fn new(model: TransformerModel, plan: &TrainPlan) -> Self {
        let opt = Optimizer::new(plan, model.params());
        TransformerTrainer { model, opt, dropout_rng: ChaCha8Rng::seed_from_u64(plan.seed.wrapping_add(1)), steps: 0 }
    }

    /// One update on `batch`; returns the loss before the update.
    pub fn step(&mut self, batch: &EncodedBatch, objective: Objective) -> Result<f64, TrainError> {
        let mut tape = Tape::new();
        let vars = self.model.params().bind(&mut tape);
        let rng = Some(&mut self.dropout_rng);
        let (_, loss) = match objective {
            Objective::Cls => self.model.classify_loss(&mut tape, &vars, batch, rng)?,
            Objective::Mlm => self.model.mlm_graph(&mut tape, &vars, batch, rng)?,
        };
        let value = tape.value(loss).item();
        let mut grads = tape.backward(loss)?;
        let grads: Vec<Tensor> = vars.iter().map(|&v| grads.take_or_zeros(v)).collect();
        self.opt.step(self.model.params_mut(), &grads)?;
        self.steps += 1;
        Ok(value)
    }

    /// Updates applied so far.
    pub fn opt_steps(&self) -> usize {
        self.steps
    }
}

/// Single-batch update loop around a [`BlstmModel`].
pub struct BlstmTrainer {
    pub model: BlstmModel,
    opt: Optimizer,
}

impl BlstmTrainer {
    pub fn new(model: BlstmModel, plan: &TrainPlan) -> Self {
        let opt = Optimizer::new(plan, model.params());
        BlstmTrainer { model, opt }
    }

    pub fn step(&mut self, batch: &WordBatch) -> Result<f64, TrainError> {
        let mut tape = Tape::new();
        let vars = self.model.params().bind(&mut tape);
        let (_, loss) = self.model.classify_loss(&mut tape, &vars, batch)?;
        let value = tape.value(loss).item();
        let mut grads = tape.backward(loss)?;
        let grads: Vec<Tensor> = vars.iter().map(|&v| grads.take_or_zeros(v)).collect();
        self.opt.step(self.model.params_mut(), &grads)?;
        Ok(value)
    }
}

pub fn predict_transformer(
    model: &TransformerModel,
    vocab: &SubwordVocab,
    tweets: &[Tweet],
) -> Result<Vec<SentimentLabel>, TrainError> {
    let mut out = Vec::with_capacity(tweets.len());
    for chunk in tweets.chunks(EVAL_BATCH) {
        let batch = encode_batch(vocab, chunk, model.config().max_seq_len);
        out.extend(model.predict(&batch)?.into_iter().map(label));
    }
    Ok(out)
}

pub fn predict_blstm(model: &BlstmModel, vocab: &WordVocab, tweets: &[Tweet]) -> Result<Vec<SentimentLabel>, TrainError> {
    let mut out = Vec::with_capacity(tweets.len());
    for chunk in tweets.chunks(EVAL_BATCH) {
        let batch = encode_words(vocab, chunk, model.config().max_seq_len);
        out.extend(model.predict(&batch)?.into_iter().map(label));
    }
    Ok(out)
}

fn label(i: usize) -> SentimentLabel {
    SentimentLabel::from_index(i).expect("three classes")
}

fn classification_snapshot(gold: &[SentimentLabel], pred: &[SentimentLabel]) -> Result<DevSnapshot, TrainError> {
    let report = metrics(&confusion(gold, pred)?)?;
    Ok(DevSnapshot { weighted_f1: Some(report.weighted_f1), accuracy: Some(report.accuracy), mlm_loss: None })
}

/// Dev masked-LM loss with a fixed masking seed, averaged over masked pieces.
fn dev_mlm_loss(model: &TransformerModel, vocab: &SubwordVocab, dev: &Corpus, plan: &TrainPlan) -> Result<f64, TrainError> {
    let (mut total, mut count) = (0.0, 0usize);
    for (i, chunk) in dev.tweets.chunks(EVAL_BATCH).enumerate() {
        let batch = encode_batch(vocab, chunk, model.config().max_seq_len);
        let batch = match apply_mlm_masking(&batch, vocab, plan.mask_rate, plan.seed ^ (i as u64) ^ 0xde5) {
            Ok(b) => b,
            Err(TrainError::NoEligiblePositions) => continue,
            Err(e) => return Err(e),
        };
        let n = batch.mlm_targets.as_ref().map_or(0, |t| t.iter().filter(|&&x| x >= 0).count());
        total += model.forward_mlm(&batch)?.loss * n as f64;
        count += n;
    }
    Ok(if count == 0 { f64::NAN } else { total / count as f64 })
}

/// Where a run's parameters come from.
enum Start {
    Random,
    Checkpoint(Checkpoint),
}

fn start_of(plan: &TrainPlan) -> Result<Start, TrainError> {
    Ok(match &plan.init {
        InitSource::Random => Start::Random,
        InitSource::FromCheckpoint(path) => Start::Checkpoint(Checkpoint::load(path)?),
    })
}

fn initial_transformer(
    plan: &TrainPlan,
    config: &ModelConfig,
    start: Start,
) -> Result<(TransformerModel, Option<String>), TrainError> {
    match start {
        Start::Random => {
            let mut model = TransformerModel::new(*config, plan.seed)?;
            model.reset_classifier(head_seed(plan.seed));
            Ok((model, None))
        }
        Start::Checkpoint(ck) => {
            let mut model = TransformerModel::from_checkpoint(&ck, Some(config))?;
            let stored = ck.to_params()?.digest(is_encoder_param);
            let loaded = model.encoder_digest();
            if stored != loaded {
                return Err(TrainError::DigestMismatch { stored, loaded });
            }
            let from_mlm = ck.extra.get("objective").and_then(|v| v.as_str()) == Some("mlm");
            if plan.objective == Objective::Cls && from_mlm {
                model.reset_classifier(head_seed(plan.seed));
            }
            Ok((model, Some(loaded)))
        }
    }
}

fn transformer_checkpoint(model: &TransformerModel, objective: Objective) -> Checkpoint {
    let mut ck = model.to_checkpoint();
    ck.extra = serde_json::json!({ "objective": objective });
    ck
}

fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

/// Tracks the retained epoch: highest dev weighted F1 for classification,
/// lowest dev masked-LM loss for MLM, the last epoch without a dev set.
struct Best {
    epoch: usize,
    score: f64,
    params: Option<ParamSet>,
}

impl Best {
    fn new() -> Self {
        Best { epoch: 0, score: f64::NEG_INFINITY, params: None }
    }

    fn offer(&mut self, epoch: usize, dev: Option<&DevSnapshot>, params: &ParamSet) {
        let score = match dev {
            Some(DevSnapshot { weighted_f1: Some(f), .. }) => *f,
            Some(DevSnapshot { mlm_loss: Some(l), .. }) if l.is_finite() => -l,
            _ => epoch as f64,
        };
        if score > self.score {
            *self = Best { epoch, score, params: Some(params.clone()) };
        }
    }
}

fn train_transformer_from(
    plan: &TrainPlan,
    start: Start,
    train: &Corpus,
    dev: &Corpus,
    vocab: &SubwordVocab,
    config: &ModelConfig,
    out_dir: Option<&Path>,
) -> Result<(RunLog, TransformerModel), TrainError> {
    plan.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    if config.vocab_size != vocab.len() {
        return Err(TrainError::InvalidPlan(format!(
            "model vocab_size {} differs from vocabulary size {}",
            config.vocab_size,
            vocab.len()
        )));
    }
    let (model, init_digest) = initial_transformer(plan, config, start)?;
    let mut trainer = TransformerTrainer::new(model, plan);
    let mut order_rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut log = RunLog {
        schema_version: RUN_LOG_SCHEMA_VERSION,
        model_kind: ModelKind::Transformer,
        objective: plan.objective,
        seed: plan.seed,
        initial_loss: f64::NAN,
        epochs: Vec::new(),
        best_epoch: 0,
        steps: 0,
        init_digest,
        final_checkpoint: None,
    };
    let mut best = Best::new();
    let dev_gold = dev.labels();
    'epochs: for epoch in 1..=plan.epochs {
        let (mut sum, mut steps) = (0.0, 0);
        for chunk in shuffled(train.len(), &mut order_rng).chunks(plan.batch_size) {
            let tweets: Vec<&Tweet> = chunk.iter().map(|&i| &train.tweets[i]).collect();
            let mut batch = encode_batch(vocab, &tweets, config.max_seq_len);
            if plan.objective == Objective::Mlm {
                batch = match apply_mlm_masking(&batch, vocab, plan.mask_rate, order_rng.gen()) {
                    Ok(b) => b,
                    Err(TrainError::NoEligiblePositions) => continue,
                    Err(e) => return Err(e),
                };
            }
            let loss = trainer.step(&batch, plan.objective)?;
            if log.steps == 0 {
                log.initial_loss = loss;
            }
            sum += loss;
            steps += 1;
            log.steps += 1;
            if plan.max_steps.is_some_and(|m| log.steps >= m) {
                finish_epoch(&mut log, &mut best, epoch, sum, steps, &trainer.model, vocab, dev, &dev_gold, plan)?;
                break 'epochs;
            }
        }
        finish_epoch(&mut log, &mut best, epoch, sum, steps, &trainer.model, vocab, dev, &dev_gold, plan)?;
    }
    let mut model = trainer.model;
    if let Some(params) = best.params {
        *model.params_mut() = params;
    }
    log.best_epoch = best.epoch;
    if let Some(dir) = out_dir {
        let path = dir.join(CHECKPOINT_FILE);
        transformer_checkpoint(&model, plan.objective).save(&path)?;
        log.final_checkpoint = Some(path);
        write_log(dir, &log)?;
    }
    Ok((log, model))
}

#[allow(clippy::too_many_arguments)]
fn finish_epoch(
    log: &mut RunLog,
    best: &mut Best,
    epoch: usize,
    sum: f64,
    steps: usize,
    model: &TransformerModel,
    vocab: &SubwordVocab,
    dev: &Corpus,
    dev_gold: &[SentimentLabel],
    plan: &TrainPlan,
) -> Result<(), TrainError> {
    let dev_snapshot = if dev.is_empty() {
        None
    } else if plan.objective == Objective::Mlm {
        Some(DevSnapshot { weighted_f1: None, accuracy: None, mlm_loss: Some(dev_mlm_loss(model, vocab, dev, plan)?) })
    } else {
        let pred = predict_transformer(model, vocab, &dev.tweets)?;
        Some(classification_snapshot(dev_gold, &pred)?)
    };
    best.offer(epoch, dev_snapshot.as_ref(), model.params());
    log.epochs.push(EpochLog { epoch, mean_loss: sum / steps.max(1) as f64, steps, dev: dev_snapshot });
    Ok(())
}

fn write_log(dir: &Path, log: &RunLog) -> Result<(), TrainError> {
    std::fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(log).expect("run log serializes");
    std::fs::write(dir.join(RUN_LOG_FILE), text + "\n")?;
    Ok(())
}

/// Trains the transformer under `plan`. With `out_dir`, the retained
/// checkpoint and the run log are written there.
pub fn train_transformer(
    plan: &TrainPlan,
    train: &Corpus,
    dev: &Corpus,
    vocab: &SubwordVocab,
    config: &ModelConfig,
    out_dir: Option<&Path>,
) -> Result<(RunLog, TransformerModel), TrainError> {
    train_transformer_from(plan, start_of(plan)?, train, dev, vocab, config, out_dir)
}

/// Trains the BLSTM baseline. The word list is built from `train`, so
/// `config.vocab_size` is replaced by its size.
pub fn train_blstm(
    plan: &TrainPlan,
    train: &Corpus,
    dev: &Corpus,
    config: &BlstmConfig,
    out_dir: Option<&Path>,
) -> Result<(RunLog, BlstmModel, WordVocab), TrainError> {
    plan.validate()?;
    if plan.objective != Objective::Cls {
        return Err(TrainError::InvalidPlan("the BLSTM baseline only trains for classification".into()));
    }
    if train.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let (model, words, init_digest) = match start_of(plan)? {
        Start::Random => {
            let words = WordVocab::build(train, 1);
            let config = BlstmConfig { vocab_size: words.len(), ..*config };
            (BlstmModel::new(config, plan.seed)?, words, None)
        }
        Start::Checkpoint(ck) => {
            let (m, w) = BlstmModel::from_checkpoint(&ck)?;
            let digest = m.params().digest(|_| true);
            (m, w, Some(digest))
        }
    };
    let max_len = model.config().max_seq_len;
    let mut trainer = BlstmTrainer::new(model, plan);
    let mut order_rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut log = RunLog {
        schema_version: RUN_LOG_SCHEMA_VERSION,
        model_kind: ModelKind::Blstm,
        objective: Objective::Cls,
        seed: plan.seed,
        initial_loss: f64::NAN,
        epochs: Vec::new(),
        best_epoch: 0,
        steps: 0,
        init_digest,
        final_checkpoint: None,
    };
    let mut best = Best::new();
    let dev_gold = dev.labels();
    for epoch in 1..=plan.epochs {
        let (mut sum, mut steps) = (0.0, 0);
        let mut stop = false;
        for chunk in shuffled(train.len(), &mut order_rng).chunks(plan.batch_size) {
            let tweets: Vec<&Tweet> = chunk.iter().map(|&i| &train.tweets[i]).collect();
            let loss = trainer.step(&encode_words(&words, &tweets, max_len))?;
            if log.steps == 0 {
                log.initial_loss = loss;
            }
            sum += loss;
            steps += 1;
            log.steps += 1;
            if plan.max_steps.is_some_and(|m| log.steps >= m) {
                stop = true;
                break;
            }
        }
        let dev_snapshot = if dev.is_empty() {
            None
        } else {
            Some(classification_snapshot(&dev_gold, &predict_blstm(&trainer.model, &words, &dev.tweets)?)?)
        };
        best.offer(epoch, dev_snapshot.as_ref(), trainer.model.params());
        log.epochs.push(EpochLog { epoch, mean_loss: sum / steps.max(1) as f64, steps, dev: dev_snapshot });
        if stop {
            break;
        }
    }
    let mut model = trainer.model;
    if let Some(params) = best.params {
        *model.params_mut() = params;
    }
    log.best_epoch = best.epoch;
    if let Some(dir) = out_dir {
        let path = dir.join(CHECKPOINT_FILE);
        model.to_checkpoint(&words).save(&path)?;
        log.final_checkpoint = Some(path);
        write_log(dir, &log)?;
    }
    Ok((log, model, words))
}

/// Dispatches to [`train_transformer`] or [`train_blstm`].
#[allow(clippy::too_many_arguments)]
pub fn train(
    kind: ModelKind,
    plan: &TrainPlan,
    train: &Corpus,
    dev: &Corpus,
    vocab: Option<&SubwordVocab>,
    transformer: &ModelConfig,
    blstm: &BlstmConfig,
    out_dir: Option<&Path>,
) -> Result<(RunLog, TrainedModel), TrainError> {
    match kind {
        ModelKind::Transformer => {
            let vocab = vocab.ok_or(TrainError::MissingVocab)?;
            let (log, m) = train_transformer(plan, train, dev, vocab, transformer, out_dir)?;
            Ok((log, TrainedModel::Transformer(m)))
        }
        ModelKind::Blstm => {
            let (log, m, w) = train_blstm(plan, train, dev, blstm, out_dir)?;
            Ok((log, TrainedModel::Blstm(m, w)))
        }
    }
}

#[derive(Debug, Clone)]
pub struct TwoStepOutcome {
    pub lm: RunLog,
    pub cls: RunLog,
    /// Encoder digest of the step-1 checkpoint.
    pub step1_digest: String,
    pub model: TransformerModel,
}

/// Masked-LM training on the task corpus, then classification fine-tuning
/// starting from the step-1 encoder with a fresh classifier head.
///
/// `plan_cls.init` is replaced by the step-1 checkpoint. With `out_dir`, the
/// steps write to `step1/` and `step2/` below it and step 2 loads the file
/// written by step 1; otherwise the checkpoint stays in memory.
pub fn two_step_finetune(
    plan_lm: &TrainPlan,
    plan_cls: &TrainPlan,
    train: &Corpus,
    dev: &Corpus,
    vocab: &SubwordVocab,
    config: &ModelConfig,
    out_dir: Option<&Path>,
) -> Result<TwoStepOutcome, TrainError> {
    if plan_lm.objective != Objective::Mlm {
        return Err(TrainError::InvalidPlan("step 1 must use the mlm objective".into()));
    }
    if plan_cls.objective != Objective::Cls {
        return Err(TrainError::InvalidPlan("step 2 must use the cls objective".into()));
    }
    let step1_dir = out_dir.map(|d| d.join("step1"));
    let (lm, step1) = train_transformer(plan_lm, train, dev, vocab, config, step1_dir.as_deref())?;
    let ck = transformer_checkpoint(&step1, Objective::Mlm);
    let step1_digest = step1.encoder_digest();
    let mut plan2 = plan_cls.clone();
    let start = match &lm.final_checkpoint {
        Some(path) => {
            plan2.init = InitSource::FromCheckpoint(path.clone());
            start_of(&plan2)?
        }
        None => Start::Checkpoint(Checkpoint::from_json(&ck.to_json())?),
    };
    let step2_dir = out_dir.map(|d| d.join("step2"));
    let (cls, model) = train_transformer_from(&plan2, start, train, dev, vocab, config, step2_dir.as_deref())?;
    if cls.init_digest.as_deref() != Some(step1_digest.as_str()) {
        return Err(TrainError::DigestMismatch {
            stored: step1_digest,
            loaded: cls.init_digest.unwrap_or_default(),
        });
    }
    Ok(TwoStepOutcome { lm, cls, step1_digest, model })
}


#[cfg(test)]
mod tests {
    use super::*;
    use super::tests_support::*;
    use crate::subword::Scheme;

    #[test]
    fn smoke_set_loss_decreases_and_reproduces() {
        use crate::synthetic::{generate, synthetic_vocab, SyntheticParams};
        let sp = SyntheticParams { size: 20, seed: 100, ..SyntheticParams::default() };
        let data = generate(&sp).unwrap();
        let vocab = synthetic_vocab(&sp, Scheme::ContinuationPrefix).unwrap();
        let cfg = ModelConfig::desk(vocab.len());
        let plan = TrainPlan {
            epochs: 4,
            seed: 1,
            batch_size: 20,
            adam: crate::training::AdamConfig { lr: 3e-3, ..Default::default() },
            ..TrainPlan::desk(Objective::Cls)
        };
        let (log, _) = train_transformer(&plan, &data, &Corpus::default(), &vocab, &cfg, None).unwrap();
        for w in log.epochs.windows(2) {
            assert!(w[1].mean_loss <= w[0].mean_loss + 1e-6, "{:?}", log.epochs);
        }
        let (again, _) = train_transformer(&plan, &data, &Corpus::default(), &vocab, &cfg, None).unwrap();
        assert_eq!(log, again);
    }

    #[test]
    fn zero_epoch_plan_rejected() {
        let plan = TrainPlan { epochs: 0, ..TrainPlan::desk(Objective::Cls) };
        let r = train_transformer(&plan, &corpus(4, 1), &corpus(2, 2), &vocab(), &config(), None);
        assert!(matches!(r, Err(TrainError::InvalidPlan(_))));
    }

    #[test]
    fn two_step_loads_step_one_encoder() {
        let dir = tempfile::tempdir().unwrap();
        let lm = TrainPlan { epochs: 3, seed: 3, ..TrainPlan::desk(Objective::Mlm) };
        let cls = TrainPlan { epochs: 1, seed: 3, ..TrainPlan::desk(Objective::Cls) };
        let data = corpus(30, 4);
        let out = two_step_finetune(&lm, &cls, &data, &corpus(10, 5), &vocab(), &config(), Some(dir.path())).unwrap();
        assert_eq!(out.cls.init_digest.as_deref(), Some(out.step1_digest.as_str()));
        assert!(dir.path().join("step1/checkpoint.json").exists());
        assert!(dir.path().join("step2/run_log.json").exists());
        let losses: Vec<f64> = out.lm.epochs.iter().map(|e| e.mean_loss).collect();
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
        let mem = two_step_finetune(&lm, &cls, &data, &corpus(10, 5), &vocab(), &config(), None).unwrap();
        assert_eq!(mem.cls.epochs, out.cls.epochs);
    }

    #[test]
    fn incompatible_checkpoint_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        TransformerModel::new(ModelConfig { hidden_size: 8, ffn_size: 8, ..config() }, 1)
            .unwrap()
            .to_checkpoint()
            .save(&path)
            .unwrap();
        let plan = TrainPlan { init: InitSource::FromCheckpoint(path), ..TrainPlan::desk(Objective::Cls) };
        let r = train_transformer(&plan, &corpus(4, 1), &corpus(2, 2), &vocab(), &config(), None);
        assert!(matches!(r, Err(TrainError::Model(crate::models::ModelError::CheckpointIncompatible(_)))));
    }

    #[test]
    fn blstm_defaults_train() {
        let plan = TrainPlan { epochs: 2, ..TrainPlan::blstm() };
        let cfg = BlstmConfig { embedding_a: 4, embedding_b: 4, hidden_size: 4, ..BlstmConfig::desk(0) };
        let (log, model, words) = train_blstm(&plan, &corpus(40, 1), &corpus(10, 2), &cfg, None).unwrap();
        assert_eq!(log.epochs.len(), 2);
        assert_eq!(log.epochs[0].steps, 2);
        assert_eq!(model.config().vocab_size, words.len());
        assert!(log.epochs[0].dev.as_ref().unwrap().weighted_f1.is_some());
    }
}
