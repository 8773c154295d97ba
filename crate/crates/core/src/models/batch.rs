use std::borrow::Borrow;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Tweet};
use crate::subword::{tokenize_tweet, SubwordVocab};

/// A padded batch of `[CLS] pieces… [SEP]` rows for the transformer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedBatch {
    pub batch_size: usize,
    pub seq_len: usize,
    /// Row-major `[batch_size × seq_len]` piece indices.
    pub indices: Vec<usize>,
    /// 1 on real pieces and the special pieces, 0 on padding.
    pub attention_mask: Vec<u8>,
    pub class_targets: Option<Vec<usize>>,
    /// Original piece index at masked positions, −1 elsewhere.
    pub mlm_targets: Option<Vec<i64>>,
    pub pad_index: usize,
}

impl EncodedBatch {
    pub fn row(&self, b: usize) -> &[usize] {
        &self.indices[b * self.seq_len..(b + 1) * self.seq_len]
    }

    pub fn mask_row(&self, b: usize) -> &[u8] {
        &self.attention_mask[b * self.seq_len..(b + 1) * self.seq_len]
    }

    /// Number of unpadded positions in row `b`.
    pub fn row_len(&self, b: usize) -> usize {
        self.mask_row(b).iter().filter(|&&m| m == 1).count()
    }

    /// Appends padding columns up to `seq_len`.
    pub fn padded_to(&self, seq_len: usize) -> EncodedBatch {
        assert!(seq_len >= self.seq_len);
        let extra = seq_len - self.seq_len;
        let widen = |v: &[usize], fill: usize| -> Vec<usize> {
            v.chunks(self.seq_len)
                .flat_map(|r| r.iter().copied().chain(std::iter::repeat(fill).take(extra)))
                .collect()
        };
        EncodedBatch {
            seq_len,
            indices: widen(&self.indices, self.pad_index),
            attention_mask: self
                .attention_mask
                .chunks(self.seq_len)
                .flat_map(|r| r.iter().copied().chain(std::iter::repeat(0).take(extra)))
                .collect(),
            mlm_targets: self.mlm_targets.as_ref().map(|t| {
                t.chunks(self.seq_len)
                    .flat_map(|r| r.iter().copied().chain(std::iter::repeat(-1).take(extra)))
                    .collect()
            }),
            ..self.clone()
        }
    }

    /// Rows reordered so that output row `i` is input row `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> EncodedBatch {
        let gather = |v: &[usize]| -> Vec<usize> {
            order.iter().flat_map(|&b| v[b * self.seq_len..(b + 1) * self.seq_len].to_vec()).collect()
        };
        EncodedBatch {
            batch_size: order.len(),
            indices: gather(&self.indices),
            attention_mask: order
                .iter()
                .flat_map(|&b| self.mask_row(b).to_vec())
                .collect(),
            class_targets: self.class_targets.as_ref().map(|t| order.iter().map(|&b| t[b]).collect()),
            mlm_targets: self.mlm_targets.as_ref().map(|t| {
                order.iter().flat_map(|&b| t[b * self.seq_len..(b + 1) * self.seq_len].to_vec()).collect()
            }),
            ..self.clone()
        }
    }
}

/// `[CLS] + pieces + [SEP]` per tweet, truncated to `max_seq_len` (SEP kept
/// last) and padded to the longest row.
pub fn encode_batch<T: Borrow<Tweet>>(vocab: &SubwordVocab, tweets: &[T], max_seq_len: usize) -> EncodedBatch {
    assert!(max_seq_len >= 2, "max_seq_len must hold [CLS] and [SEP]");
    let ids = vocab.special_ids();
    let rows: Vec<Vec<usize>> = tweets
        .iter()
        .map(|t| {
            let mut pieces = tokenize_tweet(vocab, t.borrow()).ids();
            pieces.truncate(max_seq_len - 2);
            let mut row = Vec::with_capacity(pieces.len() + 2);
            row.push(ids.cls);
            row.extend(pieces);
            row.push(ids.sep);
            row
        })
        .collect();
    let seq_len = rows.iter().map(Vec::len).max().unwrap_or(2);
    let mut indices = Vec::with_capacity(rows.len() * seq_len);
    let mut attention_mask = Vec::with_capacity(rows.len() * seq_len);
    for row in &rows {
        indices.extend(row.iter().copied().chain(std::iter::repeat(ids.pad).take(seq_len - row.len())));
        attention_mask.extend(std::iter::repeat(1).take(row.len()).chain(std::iter::repeat(0).take(seq_len - row.len())));
    }
    EncodedBatch {
        batch_size: rows.len(),
        seq_len,
        indices,
        attention_mask,
        class_targets: Some(tweets.iter().map(|t| t.borrow().sentiment.index()).collect()),
        mlm_targets: None,
        pad_index: ids.pad,
    }
}

/// Word list for the BLSTM baseline. Index 0 is padding, 1 is unknown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordVocab {
    words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl WordVocab {
    pub const PAD: usize = 0;
    pub const UNK: usize = 1;

    /// Words seen at least `min_count` times, most frequent first (ties by
    /// first appearance).
    pub fn build(corpus: &Corpus, min_count: usize) -> Self {
        let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
        for (pos, word) in corpus.tweets.iter().flat_map(Tweet::words).enumerate() {
            let e = counts.entry(word).or_insert((0, pos));
            e.0 += 1;
        }
        let mut ranked: BTreeMap<(std::cmp::Reverse<usize>, usize), &str> = BTreeMap::new();
        for (word, (count, first)) in counts {
            if count >= min_count.max(1) {
                ranked.insert((std::cmp::Reverse(count), first), word);
            }
        }
        Self::from_words(ranked.into_values().map(String::from))
    }

    pub fn from_words(words: impl IntoIterator<Item = String>) -> Self {
        let mut all = vec!["<pad>".to_string(), "<unk>".to_string()];
        all.extend(words.into_iter().filter(|w| w != "<pad>" && w != "<unk>"));
        all.dedup();
        let index = all.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        WordVocab { words: all, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(Self::UNK)
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    }
}

/// Padded word-index batch for the BLSTM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordBatch {
    pub batch_size: usize,
    pub seq_len: usize,
    pub indices: Vec<usize>,
    pub lengths: Vec<usize>,
    pub class_targets: Option<Vec<usize>>,
}

pub fn encode_words<T: Borrow<Tweet>>(vocab: &WordVocab, tweets: &[T], max_seq_len: usize) -> WordBatch {
    let rows: Vec<Vec<usize>> = tweets
        .iter()
        .map(|t| t.borrow().words().take(max_seq_len).map(|w| vocab.id(w)).collect())
        .collect();
    let seq_len = rows.iter().map(Vec::len).max().unwrap_or(1).max(1);
    let mut indices = Vec::with_capacity(rows.len() * seq_len);
    for row in &rows {
        indices.extend(row.iter().copied().chain(std::iter::repeat(WordVocab::PAD).take(seq_len - row.len())));
    }
    WordBatch {
        batch_size: rows.len(),
        seq_len,
        indices,
        lengths: rows.iter().map(Vec::len).collect(),
        class_targets: Some(tweets.iter().map(|t| t.borrow().sentiment.index()).collect()),
    }
}
