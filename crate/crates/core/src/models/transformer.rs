use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{dense, dropout, layer_norm_affine, normal_tensor, EncodedBatch, ModelConfig, ModelError, INIT_STD};
use crate::tensor::{Checkpoint, ParamSet, Tape, Tensor, Var};

pub const MODEL_KIND: &str = "transformer";

/// Additive attention bias on padded keys. Large enough that `exp` underflows
/// to exactly zero, so padding contributes nothing.
const MASK_BIAS: f64 = -1e9;

#[derive(Debug, Clone, Copy)]
enum Init {
    Normal,
    Zeros,
    Ones,
}

fn layout(c: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let (h, f, v) = (c.hidden_size, c.ffn_size, c.vocab_size);
    let mut out = vec![
        ("encoder.tok_emb".to_string(), vec![v, h], Init::Normal),
        ("encoder.pos_emb".to_string(), vec![c.max_seq_len, h], Init::Normal),
    ];
    for i in 0..c.num_blocks {
        let p = |s: &str| format!("encoder.block{i}.{s}");
        for proj in ["q", "k", "v", "o"] {
            out.push((p(&format!("attn.{proj}.w")), vec![h, h], Init::Normal));
            out.push((p(&format!("attn.{proj}.b")), vec![h], Init::Zeros));
        }
        out.push((p("ln1.gamma"), vec![h], Init::Ones));
        out.push((p("ln1.beta"), vec![h], Init::Zeros));
        out.push((p("ffn.w1"), vec![h, f], Init::Normal));
        out.push((p("ffn.b1"), vec![f], Init::Zeros));
        out.push((p("ffn.w2"), vec![f, h], Init::Normal));
        out.push((p("ffn.b2"), vec![h], Init::Zeros));
        out.push((p("ln2.gamma"), vec![h], Init::Ones));
        out.push((p("ln2.beta"), vec![h], Init::Zeros));
    }
    out.extend([
        ("pooler.w".to_string(), vec![h, h], Init::Normal),
        ("pooler.b".to_string(), vec![h], Init::Zeros),
        ("classifier.w".to_string(), vec![h, c.num_classes], Init::Normal),
        ("classifier.b".to_string(), vec![c.num_classes], Init::Zeros),
        ("mlm.transform.w".to_string(), vec![h, h], Init::Normal),
        ("mlm.transform.b".to_string(), vec![h], Init::Zeros),
        ("mlm.ln.gamma".to_string(), vec![h], Init::Ones),
        ("mlm.ln.beta".to_string(), vec![h], Init::Zeros),
        ("mlm.bias".to_string(), vec![v], Init::Zeros),
    ]);
    out
}

fn init_tensor(shape: &[usize], init: Init, rng: &mut ChaCha8Rng) -> Tensor {
    match init {
        Init::Normal => normal_tensor(shape, INIT_STD, rng),
        Init::Zeros => Tensor::zeros(shape),
        Init::Ones => Tensor::full(shape, 1.0),
    }
}

/// True for parameters of the shared encoder (everything but the task heads).
pub fn is_encoder_param(name: &str) -> bool {
    name.starts_with("encoder.") || name.starts_with("pooler.")
}

#[derive(Debug, Clone)]
struct Block {
    q: (usize, usize),
    k: (usize, usize),
    v: (usize, usize),
    o: (usize, usize),
    ln1: (usize, usize),
    ffn1: (usize, usize),
    ffn2: (usize, usize),
    ln2: (usize, usize),
}

#[derive(Debug, Clone)]
struct Slots {
    tok: usize,
    pos: usize,
    blocks: Vec<Block>,
    pooler: (usize, usize),
    classifier: (usize, usize),
    mlm_transform: (usize, usize),
    mlm_ln: (usize, usize),
    mlm_bias: usize,
}

impl Slots {
    fn resolve(params: &ParamSet, blocks: usize) -> Slots {
        let s = |n: &str| params.slot(n).unwrap_or_else(|| panic!("missing parameter `{n}`"));
        let pair = |a: &str, b: &str| (s(a), s(b));
        Slots {
            tok: s("encoder.tok_emb"),
            pos: s("encoder.pos_emb"),
            blocks: (0..blocks)
                .map(|i| {
                    let p = |x: &str| format!("encoder.block{i}.{x}");
                    Block {
                        q: pair(&p("attn.q.w"), &p("attn.q.b")),
                        k: pair(&p("attn.k.w"), &p("attn.k.b")),
                        v: pair(&p("attn.v.w"), &p("attn.v.b")),
                        o: pair(&p("attn.o.w"), &p("attn.o.b")),
                        ln1: pair(&p("ln1.gamma"), &p("ln1.beta")),
                        ffn1: pair(&p("ffn.w1"), &p("ffn.b1")),
                        ffn2: pair(&p("ffn.w2"), &p("ffn.b2")),
                        ln2: pair(&p("ln2.gamma"), &p("ln2.beta")),
                    }
                })
                .collect(),
            pooler: pair("pooler.w", "pooler.b"),
            classifier: pair("classifier.w", "classifier.b"),
            mlm_transform: pair("mlm.transform.w", "mlm.transform.b"),
            mlm_ln: pair("mlm.ln.gamma", "mlm.ln.beta"),
            mlm_bias: s("mlm.bias"),
        }
    }
}

/// Result of [`TransformerModel::forward_mlm`].
#[derive(Debug, Clone)]
pub struct MlmOutput {
    /// `[batch, seq, vocab]` logits.
    pub logits: Tensor,
    /// Mean cross-entropy over positions whose target is not −1.
    pub loss: f64,
}

/// Post-norm BERT-style encoder with a `[CLS]` pooler, a three-way
/// classifier and a masked-LM head tied to the piece embeddings.
#[derive(Debug, Clone)]
pub struct TransformerModel {
    config: ModelConfig,
    params: ParamSet,
    slots: Slots,
}

impl TransformerModel {
    /// Normal(0, 0.02) weights and embeddings, zero biases, unit LN gains.
    /// The same seed always yields bit-identical parameters.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        for (name, shape, init) in layout(&config) {
            params.insert(name, init_tensor(&shape, init, &mut rng));
        }
        let slots = Slots::resolve(&params, config.num_blocks);
        Ok(TransformerModel { config, params, slots })
    }

    /// Wraps existing parameters after checking names and shapes.
    pub fn from_params(config: ModelConfig, params: ParamSet) -> Result<Self, ModelError> {
        config.validate()?;
        let expected = layout(&config);
        if expected.len() != params.len() {
            return Err(ModelError::CheckpointIncompatible(format!(
                "expected {} parameters, found {}",
                expected.len(),
                params.len()
            )));
        }
        for (name, shape, _) in &expected {
            match params.get(name) {
                None => return Err(ModelError::CheckpointIncompatible(format!("missing parameter `{name}`"))),
                Some(t) if t.shape() != shape.as_slice() => {
                    return Err(ModelError::CheckpointIncompatible(format!(
                        "`{name}` has shape {:?}, config needs {shape:?}",
                        t.shape()
                    )))
                }
                Some(_) => {}
            }
        }
        let slots = Slots::resolve(&params, config.num_blocks);
        Ok(TransformerModel { config, params, slots })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Redraws the classifier head from its own seed, leaving the encoder.
    pub fn reset_classifier(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, b) = self.slots.classifier;
        let shape = self.params.tensors()[w].shape().to_vec();
        self.params.tensors_mut()[w] = normal_tensor(&shape, INIT_STD, &mut rng);
        let shape = self.params.tensors()[b].shape().to_vec();
        self.params.tensors_mut()[b] = Tensor::zeros(&shape);
    }

    /// SHA-256 of the encoder and pooler parameters.
    pub fn encoder_digest(&self) -> String {
        self.params.digest(is_encoder_param)
    }

    /// Final hidden states `[batch, seq, hidden]`. Dropout is applied only
    /// when `rng` is given.
    pub fn encode(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        batch: &EncodedBatch,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var, ModelError> {
        let c = &self.config;
        let (b, t, h, nh) = (batch.batch_size, batch.seq_len, c.hidden_size, c.num_heads);
        let hd = c.head_size();
        let rate = c.dropout_rate;
        if t > c.max_seq_len {
            return Err(ModelError::InvalidConfig(format!(
                "batch sequence length {t} exceeds max_seq_len {}",
                c.max_seq_len
            )));
        }
        let s = &self.slots;
        let tok = tape.embedding(vars[s.tok], &batch.indices, &[b, t])?;
        let positions: Vec<usize> = (0..t).collect();
        let pos = tape.embedding(vars[s.pos], &positions, &[t])?;
        let mut x = tape.add(tok, pos)?;
        x = dropout(tape, x, rate, rng.as_deref_mut())?;

        let mut bias = Vec::with_capacity(b * nh * t * t);
        for bi in 0..b {
            let keys = batch.mask_row(bi);
            for _ in 0..nh * t {
                bias.extend(keys.iter().map(|&m| if m == 1 { 0.0 } else { MASK_BIAS }));
            }
        }
        let bias = tape.constant(Tensor::new(vec![b, nh, t, t], bias)?);
        let inv_sqrt = 1.0 / (hd as f64).sqrt();

        for blk in &s.blocks {
            let heads = |tape: &mut Tape, (w, bb): (usize, usize)| -> Result<Var, ModelError> {
                let y = dense(tape, x, vars[w], vars[bb])?;
                let y = tape.reshape(y, &[b, t, nh, hd])?;
                Ok(tape.permute(y, &[0, 2, 1, 3])?)
            };
            let q = heads(tape, blk.q)?;
            let k = heads(tape, blk.k)?;
            let v = heads(tape, blk.v)?;
            let kt = tape.transpose(k)?;
            let scores = tape.matmul(q, kt)?;
            let scores = tape.scale(scores, inv_sqrt)?;
            let scores = tape.add(scores, bias)?;
            let probs = tape.softmax(scores, 3)?;
            let probs = dropout(tape, probs, rate, rng.as_deref_mut())?;
            let ctx = tape.matmul(probs, v)?;
            let ctx = tape.permute(ctx, &[0, 2, 1, 3])?;
            let ctx = tape.reshape(ctx, &[b, t, h])?;
            let attn = dense(tape, ctx, vars[blk.o.0], vars[blk.o.1])?;
            let attn = dropout(tape, attn, rate, rng.as_deref_mut())?;
            let res = tape.add(x, attn)?;
            x = layer_norm_affine(tape, res, vars[blk.ln1.0], vars[blk.ln1.1])?;

            let f = dense(tape, x, vars[blk.ffn1.0], vars[blk.ffn1.1])?;
            let f = tape.gelu(f)?;
            let f = dense(tape, f, vars[blk.ffn2.0], vars[blk.ffn2.1])?;
            let f = dropout(tape, f, rate, rng.as_deref_mut())?;
            let res = tape.add(x, f)?;
            x = layer_norm_affine(tape, res, vars[blk.ln2.0], vars[blk.ln2.1])?;
        }
        Ok(x)
    }

    /// Classification logits `[batch, 3]` from the pooled `[CLS]` state.
    pub fn classify_graph(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        batch: &EncodedBatch,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var, ModelError> {
        let hidden = self.encode(tape, vars, batch, rng.as_deref_mut())?;
        let cls = tape.select(hidden, 1, 0)?;
        let (pw, pb) = self.slots.pooler;
        let pooled = dense(tape, cls, vars[pw], vars[pb])?;
        let pooled = tape.tanh(pooled)?;
        let pooled = dropout(tape, pooled, self.config.dropout_rate, rng)?;
        let (cw, cb) = self.slots.classifier;
        Ok(dense(tape, pooled, vars[cw], vars[cb])?)
    }

    /// Mean cross-entropy of the classification logits against the batch
    /// class targets.
    pub fn classify_loss(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        batch: &EncodedBatch,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Var, Var), ModelError> {
        let targets = batch.class_targets.as_ref().ok_or(ModelError::NoClassTargets)?;
        let logits = self.classify_graph(tape, vars, batch, rng)?;
        let targets: Vec<Option<usize>> = targets.iter().map(|&t| Some(t)).collect();
        let loss = tape.cross_entropy(logits, &targets)?;
        Ok((logits, loss))
    }

    /// Masked-LM logits `[batch·seq, vocab]` and their mean loss over the
    /// positions with a target.
    pub fn mlm_graph(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        batch: &EncodedBatch,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Var, Var), ModelError> {
        let targets: Vec<Option<usize>> = match &batch.mlm_targets {
            Some(t) => t.iter().map(|&x| usize::try_from(x).ok()).collect(),
            None => return Err(ModelError::NoMaskedPositions),
        };
        if targets.iter().all(Option::is_none) {
            return Err(ModelError::NoMaskedPositions);
        }
        let hidden = self.encode(tape, vars, batch, rng.as_deref_mut())?;
        let (b, t, h) = (batch.batch_size, batch.seq_len, self.config.hidden_size);
        let flat = tape.reshape(hidden, &[b * t, h])?;
        let s = &self.slots;
        let y = dense(tape, flat, vars[s.mlm_transform.0], vars[s.mlm_transform.1])?;
        let y = tape.gelu(y)?;
        let y = layer_norm_affine(tape, y, vars[s.mlm_ln.0], vars[s.mlm_ln.1])?;
        let decoder = tape.transpose(vars[s.tok])?;
        let logits = tape.matmul(y, decoder)?;
        let logits = tape.add(logits, vars[s.mlm_bias])?;
        let loss = tape.cross_entropy(logits, &targets)?;
        Ok((logits, loss))
    }

    /// Evaluation-mode classification logits `[batch, 3]`.
    pub fn forward_classify(&self, batch: &EncodedBatch) -> Result<Tensor, ModelError> {
        let mut tape = Tape::new();
        let vars = self.bind_constants(&mut tape);
        let logits = self.classify_graph(&mut tape, &vars, batch, None)?;
        Ok(tape.value(logits).clone())
    }

    /// Evaluation-mode masked-LM logits and loss.
    pub fn forward_mlm(&self, batch: &EncodedBatch) -> Result<MlmOutput, ModelError> {
        let mut tape = Tape::new();
        let vars = self.bind_constants(&mut tape);
        let (logits, loss) = self.mlm_graph(&mut tape, &vars, batch, None)?;
        let (b, t, v) = (batch.batch_size, batch.seq_len, self.config.vocab_size);
        let logits = Tensor::new(vec![b, t, v], tape.value(logits).data().to_vec())?;
        Ok(MlmOutput { logits, loss: tape.value(loss).item() })
    }

    /// Arg-max class index per row.
    pub fn predict(&self, batch: &EncodedBatch) -> Result<Vec<usize>, ModelError> {
        let logits = self.forward_classify(batch)?;
        Ok((0..batch.batch_size).map(|r| argmax(logits.row(r))).collect())
    }

    fn bind_constants(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.tensors().iter().map(|t| tape.constant(t.clone())).collect()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let config = serde_json::to_value(self.config).expect("config serializes");
        Checkpoint::from_params(MODEL_KIND, config, &self.params)
    }

    /// Restores a model. With `expected`, the stored config must match it.
    pub fn from_checkpoint(ckpt: &Checkpoint, expected: Option<&ModelConfig>) -> Result<Self, ModelError> {
        if ckpt.model_kind != MODEL_KIND {
            return Err(ModelError::CheckpointIncompatible(format!(
                "checkpoint holds a `{}` model, expected `{MODEL_KIND}`",
                ckpt.model_kind
            )));
        }
        let config: ModelConfig = serde_json::from_value(ckpt.config.clone())
            .map_err(|e| ModelError::CheckpointIncompatible(format!("bad config: {e}")))?;
        if let Some(exp) = expected {
            if !same_architecture(exp, &config) {
                return Err(ModelError::CheckpointIncompatible(format!(
                    "checkpoint config {config:?} does not match {exp:?}"
                )));
            }
        }
        let config = expected.copied().unwrap_or(config);
        Self::from_params(config, ckpt.to_params()?)
    }
}

/// Equal in every field that fixes a parameter shape.
fn same_architecture(a: &ModelConfig, b: &ModelConfig) -> bool {
    ModelConfig { dropout_rate: 0.0, ..*a } == ModelConfig { dropout_rate: 0.0, ..*b }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradcheck;

    fn config() -> ModelConfig {
        ModelConfig { vocab_size: 12, max_seq_len: 10, ..ModelConfig::desk(12) }
    }

    fn batch(rows: &[&[usize]]) -> EncodedBatch {
        let t = rows.iter().map(|r| r.len()).max().unwrap();
        let mut indices = Vec::new();
        let mut attention_mask = Vec::new();
        for r in rows {
            indices.extend(r.iter().copied().chain(std::iter::repeat(0).take(t - r.len())));
            attention_mask.extend(std::iter::repeat(1).take(r.len()).chain(std::iter::repeat(0).take(t - r.len())));
        }
        EncodedBatch {
            batch_size: rows.len(),
            seq_len: t,
            indices,
            attention_mask,
            class_targets: Some((0..rows.len()).map(|i| i % 3).collect()),
            mlm_targets: None,
            pad_index: 0,
        }
    }

    #[test]
    fn logits_shape() {
        let m = TransformerModel::new(config(), 1).unwrap();
        let l = m.forward_classify(&batch(&[&[2, 5, 6, 3], &[2, 7, 3]])).unwrap();
        assert_eq!(l.shape(), [2, 3]);
        assert!(l.is_finite());
    }

    #[test]
    fn zero_head_gives_equal_logits() {
        let mut m = TransformerModel::new(config(), 2).unwrap();
        for n in ["classifier.w", "classifier.b"] {
            m.params_mut().get_mut(n).unwrap().data_mut().fill(0.0);
        }
        let l = m.forward_classify(&batch(&[&[2, 5, 6, 3], &[2, 7, 3]])).unwrap();
        for r in 0..2 {
            assert!(l.row(r).iter().all(|&x| x == l.row(r)[0]));
        }
    }

    #[test]
    fn permuting_rows_permutes_logits() {
        let m = TransformerModel::new(config(), 3).unwrap();
        let b = batch(&[&[2, 5, 6, 3], &[2, 7, 3], &[2, 8, 9, 10, 3]]);
        let l = m.forward_classify(&b).unwrap();
        let order = [2, 0, 1];
        let lp = m.forward_classify(&b.permuted(&order)).unwrap();
        for (i, &src) in order.iter().enumerate() {
            for (x, y) in lp.row(i).iter().zip(l.row(src)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn padding_does_not_change_logits() {
        let m = TransformerModel::new(config(), 4).unwrap();
        let b = batch(&[&[2, 5, 6, 3], &[2, 7, 3]]);
        let l = m.forward_classify(&b).unwrap();
        let lp = m.forward_classify(&b.padded_to(9)).unwrap();
        for (x, y) in l.data().iter().zip(lp.data()) {
            assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn parameter_count_matches_formula() {
        for c in [config(), ModelConfig { num_blocks: 3, ffn_size: 48, ..config() }] {
            let m = TransformerModel::new(c, 0).unwrap();
            assert_eq!(m.params().numel(), c.parameter_count());
        }
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = TransformerModel::new(config(), 9).unwrap();
        let b = TransformerModel::new(config(), 9).unwrap();
        let c = TransformerModel::new(config(), 10).unwrap();
        assert_eq!(a.params().digest(|_| true), b.params().digest(|_| true));
        assert_ne!(a.params().digest(|_| true), c.params().digest(|_| true));
    }

    #[test]
    fn mlm_loss_near_uniform_at_init() {
        let c = ModelConfig { vocab_size: 200, ..config() };
        let m = TransformerModel::new(c, 5).unwrap();
        let mut b = batch(&[&[2, 50, 60, 70, 3], &[2, 80, 90, 3]]);
        b.mlm_targets = Some(vec![-1, 50, -1, 70, -1, -1, 80, 90, -1, -1]);
        let out = m.forward_mlm(&b).unwrap();
        assert_eq!(out.logits.shape(), [2, 5, 200]);
        let ln_v = 200f64.ln();
        assert!((out.loss - ln_v).abs() / ln_v < 0.2, "{} vs {ln_v}", out.loss);
    }

    #[test]
    fn mlm_single_position_and_target_independence() {
        let m = TransformerModel::new(config(), 6).unwrap();
        let mut b = batch(&[&[2, 5, 6, 3]]);
        b.mlm_targets = Some(vec![-1, 5, -1, -1]);
        let out = m.forward_mlm(&b).unwrap();
        let row = &out.logits.data()[12..24];
        let lse = row.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((out.loss - (lse - row[5])).abs() < 1e-12);
        b.mlm_targets = None;
        assert!(matches!(m.forward_mlm(&b), Err(ModelError::NoMaskedPositions)));
        b.mlm_targets = Some(vec![-1; 4]);
        assert!(matches!(m.forward_mlm(&b), Err(ModelError::NoMaskedPositions)));
    }

    #[test]
    fn checkpoint_round_trip_and_mismatch() {
        let m = TransformerModel::new(config(), 7).unwrap();
        let ck = Checkpoint::from_json(&m.to_checkpoint().to_json()).unwrap();
        let back = TransformerModel::from_checkpoint(&ck, Some(&config())).unwrap();
        assert_eq!(back.params().digest(|_| true), m.params().digest(|_| true));
        let other = ModelConfig { hidden_size: 16, ffn_size: 32, ..config() };
        assert!(matches!(
            TransformerModel::from_checkpoint(&ck, Some(&other)),
            Err(ModelError::CheckpointIncompatible(_))
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let c = ModelConfig { vocab_size: 8, max_seq_len: 5, hidden_size: 8, ffn_size: 12, ..config() };
        let m = TransformerModel::new(c, 8).unwrap();
        let mut b = batch(&[&[2, 5, 6, 3], &[2, 7, 3]]);
        b.mlm_targets = Some(vec![-1, 5, 6, -1, -1, 7, -1, -1]);
        let r = gradcheck(m.params(), |_| true, |tape, vars| {
            let (_, cl) = m.classify_loss(tape, vars, &b, None).map_err(tensor_err)?;
            let (_, ml) = m.mlm_graph(tape, vars, &b, None).map_err(tensor_err)?;
            tape.add(cl, ml)
        })
        .unwrap();
        assert!(r.max_rel_error <= 1e-4, "{r:?}");
    }

    fn tensor_err(e: ModelError) -> crate::tensor::TensorError {
        match e {
            ModelError::Tensor(t) => t,
            other => panic!("{other}"),
        }
    }
}
