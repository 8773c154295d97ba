use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::transformer::argmax;
use super::{dense, normal_tensor, BlstmConfig, ModelError, WordBatch, WordVocab};
use crate::tensor::{Checkpoint, ParamSet, Tape, Tensor, TensorError, Var};

pub const MODEL_KIND: &str = "blstm";

/// Standard deviation for randomly initialized embedding tables.
const EMBEDDING_STD: f64 = 0.1;

/// One of the two stacked embedding tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingSlot {
    /// Nominally English vectors (`emb.en`).
    English,
    /// Nominally Spanish vectors (`emb.es`).
    Spanish,
}

impl EmbeddingSlot {
    pub fn param_name(self) -> &'static str {
        match self {
            EmbeddingSlot::English => "emb.en",
            EmbeddingSlot::Spanish => "emb.es",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Direction {
    w_x: usize,
    w_h: usize,
    b: usize,
}

/// Bidirectional LSTM over stacked word embeddings. Gate order in the fused
/// weight matrices is input, forget, cell, output.
#[derive(Debug, Clone)]
pub struct BlstmModel {
    config: BlstmConfig,
    params: ParamSet,
    emb: (usize, usize),
    fwd: Direction,
    bwd: Direction,
    out: (usize, usize),
}

fn layout(c: &BlstmConfig) -> Vec<(&'static str, Vec<usize>)> {
    let (e, h) = (c.stacked_width(), c.hidden_size);
    vec![
        ("emb.en", vec![c.vocab_size, c.embedding_a]),
        ("emb.es", vec![c.vocab_size, c.embedding_b]),
        ("fwd.w_x", vec![e, 4 * h]),
        ("fwd.w_h", vec![h, 4 * h]),
        ("fwd.b", vec![4 * h]),
        ("bwd.w_x", vec![e, 4 * h]),
        ("bwd.w_h", vec![h, 4 * h]),
        ("bwd.b", vec![4 * h]),
        ("out.w", vec![2 * h, c.num_classes]),
        ("out.b", vec![c.num_classes]),
    ]
}

impl BlstmModel {
    /// Embeddings ~ N(0, 0.1²); LSTM and output weights ~ U(±1/√hidden);
    /// biases zero.
    pub fn new(config: BlstmConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (config.hidden_size as f64).sqrt();
        let mut params = ParamSet::new();
        for (name, shape) in layout(&config) {
            let t = if name.starts_with("emb.") {
                normal_tensor(&shape, EMBEDDING_STD, &mut rng)
            } else if name.ends_with(".b") {
                Tensor::zeros(&shape)
            } else {
                let n = shape.iter().product();
                Tensor::new(shape, (0..n).map(|_| rng.gen_range(-bound..bound)).collect())?
            };
            params.insert(name, t);
        }
        Ok(Self::wrap(config, params))
    }

    pub fn from_params(config: BlstmConfig, params: ParamSet) -> Result<Self, ModelError> {
        config.validate()?;
        let expected = layout(&config);
        if expected.len() != params.len() {
            return Err(ModelError::CheckpointIncompatible(format!(
                "expected {} parameters, found {}",
                expected.len(),
                params.len()
            )));
        }
        for (name, shape) in &expected {
            match params.get(name) {
                Some(t) if t.shape() == shape.as_slice() => {}
                Some(t) => {
                    return Err(ModelError::CheckpointIncompatible(format!(
                        "`{name}` has shape {:?}, config needs {shape:?}",
                        t.shape()
                    )))
                }
                None => return Err(ModelError::CheckpointIncompatible(format!("missing parameter `{name}`"))),
            }
        }
        Ok(Self::wrap(config, params))
    }

    fn wrap(config: BlstmConfig, params: ParamSet) -> Self {
        let s = |n: &str| params.slot(n).expect("layout checked");
        let dir = |p: &str| Direction {
            w_x: s(&format!("{p}.w_x")),
            w_h: s(&format!("{p}.w_h")),
            b: s(&format!("{p}.b")),
        };
        BlstmModel {
            emb: (s("emb.en"), s("emb.es")),
            fwd: dir("fwd"),
            bwd: dir("bwd"),
            out: (s("out.w"), s("out.b")),
            config,
            params,
        }
    }

    pub fn config(&self) -> &BlstmConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Overwrites embedding rows from a word-vector text file (`word v1 v2 …`
    /// per line, optional `count dim` header). Words outside `vocab` are
    /// skipped. Returns the number of rows replaced.
    pub fn load_word_vectors(
        &mut self,
        slot: EmbeddingSlot,
        text: &str,
        vocab: &WordVocab,
    ) -> Result<usize, ModelError> {
        let width = match slot {
            EmbeddingSlot::English => self.config.embedding_a,
            EmbeddingSlot::Spanish => self.config.embedding_b,
        };
        let table = self.params.get_mut(slot.param_name()).expect("slot exists");
        let mut loaded = 0;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                continue;
            }
            if fields.len() != width + 1 {
                return Err(ModelError::WordVectors {
                    line_no,
                    reason: format!("expected {width} values, found {}", fields.len() - 1),
                });
            }
            let mut values = Vec::with_capacity(width);
            for f in &fields[1..] {
                let v: f64 = f.parse().map_err(|_| ModelError::WordVectors {
                    line_no,
                    reason: format!("`{f}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(ModelError::WordVectors { line_no, reason: format!("`{f}` is not finite") });
                }
                values.push(v);
            }
            let id = vocab.id(fields[0]);
            if id == WordVocab::UNK && fields[0] != "<unk>" {
                continue;
            }
            table.data_mut()[id * width..(id + 1) * width].copy_from_slice(&values);
            loaded += 1;
        }
        Ok(loaded)
    }

    fn run_direction(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        x: Var,
        batch: &WordBatch,
        dir: Direction,
        reverse: bool,
    ) -> Result<Var, TensorError> {
        let (b, h) = (batch.batch_size, self.config.hidden_size);
        let mut hs = tape.constant(Tensor::zeros(&[b, h]));
        let mut cs = tape.constant(Tensor::zeros(&[b, h]));
        let steps: Vec<usize> = if reverse {
            (0..batch.seq_len).rev().collect()
        } else {
            (0..batch.seq_len).collect()
        };
        for t in steps {
            let live: Vec<bool> = batch.lengths.iter().map(|&l| t < l).collect();
            if !live.iter().any(|&l| l) {
                continue;
            }
            let xt = tape.select(x, 1, t)?;
            let gx = tape.matmul(xt, vars[dir.w_x])?;
            let gh = tape.matmul(hs, vars[dir.w_h])?;
            let gates = tape.add(gx, gh)?;
            let gates = tape.add(gates, vars[dir.b])?;
            let i = tape.narrow(gates, 0, h)?;
            let i = tape.sigmoid(i)?;
            let f = tape.narrow(gates, h, h)?;
            let f = tape.sigmoid(f)?;
            let g = tape.narrow(gates, 2 * h, h)?;
            let g = tape.tanh(g)?;
            let o = tape.narrow(gates, 3 * h, h)?;
            let o = tape.sigmoid(o)?;
            let fc = tape.mul(f, cs)?;
            let ig = tape.mul(i, g)?;
            let c_new = tape.add(fc, ig)?;
            let tc = tape.tanh(c_new)?;
            let h_new = tape.mul(o, tc)?;
            if live.iter().all(|&l| l) {
                hs = h_new;
                cs = c_new;
            } else {
                let keep: Vec<f64> = live.iter().flat_map(|&l| std::iter::repeat(if l { 1.0 } else { 0.0 }).take(h)).collect();
                let hold: Vec<f64> = keep.iter().map(|k| 1.0 - k).collect();
                let keep = tape.constant(Tensor::new(vec![b, h], keep)?);
                let hold = tape.constant(Tensor::new(vec![b, h], hold)?);
                hs = blend(tape, h_new, hs, keep, hold)?;
                cs = blend(tape, c_new, cs, keep, hold)?;
            }
        }
        Ok(hs)
    }

    /// Final forward and backward hidden states, each `[batch, hidden]`.
    pub fn final_states_graph(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        batch: &WordBatch,
    ) -> Result<(Var, Var), TensorError> {
        let shape = [batch.batch_size, batch.seq_len];
        let a = tape.embedding(vars[self.emb.0], &batch.indices, &shape)?;
        let b = tape.embedding(vars[self.emb.1], &batch.indices, &shape)?;
        let x = tape.concat(&[a, b])?;
        let f = self.run_direction(tape, vars, x, batch, self.fwd, false)?;
        let r = self.run_direction(tape, vars, x, batch, self.bwd, true)?;
        Ok((f, r))
    }

    pub fn classify_graph(&self, tape: &mut Tape, vars: &[Var], batch: &WordBatch) -> Result<Var, TensorError> {
        let (f, r) = self.final_states_graph(tape, vars, batch)?;
        let both = tape.concat(&[f, r])?;
        dense(tape, both, vars[self.out.0], vars[self.out.1])
    }

    pub fn classify_loss(&self, tape: &mut Tape, vars: &[Var], batch: &WordBatch) -> Result<(Var, Var), ModelError> {
        let targets = batch.class_targets.as_ref().ok_or(ModelError::NoClassTargets)?;
        let logits = self.classify_graph(tape, vars, batch)?;
        let targets: Vec<Option<usize>> = targets.iter().map(|&t| Some(t)).collect();
        let loss = tape.cross_entropy(logits, &targets)?;
        Ok((logits, loss))
    }

    pub fn final_states(&self, batch: &WordBatch) -> Result<(Tensor, Tensor), ModelError> {
        let mut tape = Tape::new();
        let vars = self.bind_constants(&mut tape);
        let (f, r) = self.final_states_graph(&mut tape, &vars, batch)?;
        Ok((tape.value(f).clone(), tape.value(r).clone()))
    }

    /// Logits `[batch, 3]` over the concatenated final states.
    pub fn forward_blstm(&self, batch: &WordBatch) -> Result<Tensor, ModelError> {
        let mut tape = Tape::new();
        let vars = self.bind_constants(&mut tape);
        let logits = self.classify_graph(&mut tape, &vars, batch)?;
        Ok(tape.value(logits).clone())
    }

    pub fn predict(&self, batch: &WordBatch) -> Result<Vec<usize>, ModelError> {
        let logits = self.forward_blstm(batch)?;
        Ok((0..batch.batch_size).map(|r| argmax(logits.row(r))).collect())
    }

    fn bind_constants(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.tensors().iter().map(|t| tape.constant(t.clone())).collect()
    }

    /// Checkpoint carrying the word list in its `extra` field.
    pub fn to_checkpoint(&self, vocab: &WordVocab) -> Checkpoint {
        let mut ck = Checkpoint::from_params(
            MODEL_KIND,
            serde_json::to_value(self.config).expect("config serializes"),
            &self.params,
        );
        ck.extra = serde_json::json!({ "words": vocab.words() });
        ck
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<(Self, WordVocab), ModelError> {
        if ckpt.model_kind != MODEL_KIND {
            return Err(ModelError::CheckpointIncompatible(format!(
                "checkpoint holds a `{}` model, expected `{MODEL_KIND}`",
                ckpt.model_kind
            )));
        }
        let config: BlstmConfig = serde_json::from_value(ckpt.config.clone())
            .map_err(|e| ModelError::CheckpointIncompatible(format!("bad config: {e}")))?;
        let words: Vec<String> = serde_json::from_value(ckpt.extra["words"].clone())
            .map_err(|e| ModelError::CheckpointIncompatible(format!("bad word list: {e}")))?;
        let vocab = WordVocab::from_words(words);
        if vocab.len() != config.vocab_size {
            return Err(ModelError::CheckpointIncompatible(format!(
                "word list has {} entries, config says {}",
                vocab.len(),
                config.vocab_size
            )));
        }
        Ok((Self::from_params(config, ckpt.to_params()?)?, vocab))
    }
}

/// `keep ⊙ new + hold ⊙ old` with constant 0/1 masks.
fn blend(tape: &mut Tape, new: Var, old: Var, keep: Var, hold: Var) -> Result<Var, TensorError> {
    let a = tape.mul(new, keep)?;
    let b = tape.mul(old, hold)?;
    tape.add(a, b)
}
