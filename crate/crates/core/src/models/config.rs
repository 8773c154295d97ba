use serde::{Deserialize, Serialize};

use super::ModelError;

/// Standard deviation of the normal initializer for weights and embeddings.
pub const INIT_STD: f64 = 0.02;
pub const LAYER_NORM_EPS: f64 = 1e-12;

/// Transformer encoder architecture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_blocks: usize,
    pub num_heads: usize,
    pub hidden_size: usize,
    pub ffn_size: usize,
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub num_classes: usize,
    pub dropout_rate: f64,
}

impl ModelConfig {
    /// Two blocks, two heads, hidden size 32.
    pub fn desk(vocab_size: usize) -> Self {
        ModelConfig {
            num_blocks: 2,
            num_heads: 2,
            hidden_size: 32,
            ffn_size: 64,
            vocab_size,
            max_seq_len: 40,
            num_classes: 3,
            dropout_rate: 0.1,
        }
    }

    /// BERT-base sizes (12 blocks, 12 heads, hidden 768).
    pub fn bert_base(vocab_size: usize) -> Self {
        ModelConfig {
            num_blocks: 12,
            num_heads: 12,
            hidden_size: 768,
            ffn_size: 3072,
            vocab_size,
            max_seq_len: 512,
            num_classes: 3,
            dropout_rate: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: String| Err(ModelError::InvalidConfig(m));
        if self.num_blocks == 0 || self.num_heads == 0 || self.hidden_size == 0 || self.ffn_size == 0 {
            return fail("block count, head count, hidden and ffn sizes must be positive".into());
        }
        if self.hidden_size % self.num_heads != 0 {
            return fail(format!(
                "hidden size {} is not divisible by {} heads",
                self.hidden_size, self.num_heads
            ));
        }
        if self.max_seq_len < 2 {
            return fail("max_seq_len must leave room for [CLS] and one piece".into());
        }
        if self.num_classes != 3 {
            return fail(format!("num_classes must be 3, got {}", self.num_classes));
        }
        if self.vocab_size == 0 {
            return fail("vocab_size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        Ok(())
    }

    pub fn head_size(&self) -> usize {
        self.hidden_size / self.num_heads
    }

    /// Closed-form parameter count of [`super::TransformerModel`].
    pub fn parameter_count(&self) -> usize {
        let (h, f, v, c) = (self.hidden_size, self.ffn_size, self.vocab_size, self.num_classes);
        let embeddings = v * h + self.max_seq_len * h;
        let attention = 4 * (h * h + h);
        let ffn = h * f + f + f * h + h;
        let norms = 2 * 2 * h;
        let pooler = h * h + h;
        let classifier = h * c + c;
        // tied decoder: transform dense + layer norm + output bias only
        let mlm = h * h + h + 2 * h + v;
        embeddings + self.num_blocks * (attention + ffn + norms) + pooler + classifier + mlm
    }
}

/// BLSTM baseline architecture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlstmConfig {
    /// Word vocabulary size, including padding and unknown entries.
    pub vocab_size: usize,
    /// Width of the English-slot embedding table.
    pub embedding_a: usize,
    /// Width of the Spanish-slot embedding table.
    pub embedding_b: usize,
    pub hidden_size: usize,
    pub max_seq_len: usize,
    pub num_classes: usize,
}

impl BlstmConfig {
    pub fn desk(vocab_size: usize) -> Self {
        BlstmConfig {
            vocab_size,
            embedding_a: 16,
            embedding_b: 16,
            hidden_size: 16,
            max_seq_len: 40,
            num_classes: 3,
        }
    }

    pub fn stacked_width(&self) -> usize {
        self.embedding_a + self.embedding_b
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.vocab_size < 2 || self.embedding_a == 0 || self.embedding_b == 0 || self.hidden_size == 0 {
            return Err(ModelError::InvalidConfig(
                "BLSTM vocab (>= 2), embedding and hidden sizes must be positive".into(),
            ));
        }
        if self.max_seq_len == 0 {
            return Err(ModelError::InvalidConfig("max_seq_len must be positive".into()));
        }
        if self.num_classes != 3 {
            return Err(ModelError::InvalidConfig(format!(
                "num_classes must be 3, got {}",
                self.num_classes
            )));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        let (e, h) = (self.stacked_width(), self.hidden_size);
        let lstm = e * 4 * h + h * 4 * h + 4 * h;
        self.vocab_size * e + 2 * lstm + 2 * h * self.num_classes + self.num_classes
    }
}
