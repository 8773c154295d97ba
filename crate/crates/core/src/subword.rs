//! Subword tokenization over a fixed piece vocabulary.
//!
//! Two marking conventions are supported:
//!
//! * [`Scheme::ContinuationPrefix`] (WordPiece): word-internal pieces carry a
//!   `##` prefix, e.g. `dis ##fr ##uto`.
//! * [`Scheme::WordInitialMarker`] (SentencePiece): the word-initial piece
//!   carries a `▁` marker, e.g. `▁dis fru to`.
//!
//! Both use greedy longest-match-first segmentation. The module also provides
//! a rule-based word-level tokenizer and the non-first-token count used to
//! compare how well a vocabulary fits a corpus.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Tweet};

pub const CONTINUATION_PREFIX: &str = "##";
pub const WORD_INITIAL_MARKER: char = '▁';
/// Words longer than this (in characters) map straight to the unknown piece.
pub const MAX_WORD_CHARS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VocabError {
    #[error("line {0}: duplicate piece")]
    DuplicatePiece(usize),
    #[error("line {0}: empty piece")]
    EmptyPiece(usize),
    #[error("vocabulary is missing the special piece `{0}`")]
    MissingSpecial(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ContinuationPrefix,
    WordInitialMarker,
}

impl Scheme {
    pub fn default_specials(self) -> SpecialPieces {
        match self {
            Scheme::ContinuationPrefix => SpecialPieces {
                unk: "[UNK]".into(),
                cls: "[CLS]".into(),
                sep: "[SEP]".into(),
                mask: "[MASK]".into(),
                pad: "[PAD]".into(),
            },
            Scheme::WordInitialMarker => SpecialPieces {
                unk: "<unk>".into(),
                cls: "<s>".into(),
                sep: "</s>".into(),
                mask: "<mask>".into(),
                pad: "<pad>".into(),
            },
        }
    }
}

impl FromStr for Scheme {
    type Err = String;

    /// Accepts the command-line names `wordpiece` / `sentencepiece` as well
    /// as the scheme names themselves.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wordpiece" | "continuation_prefix" => Ok(Scheme::ContinuationPrefix),
            "sentencepiece" | "word_initial_marker" => Ok(Scheme::WordInitialMarker),
            other => Err(format!("unknown tokenizer scheme `{other}`")),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::ContinuationPrefix => "wordpiece",
            Scheme::WordInitialMarker => "sentencepiece",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialPieces {
    pub unk: String,
    pub cls: String,
    pub sep: String,
    pub mask: String,
    pub pad: String,
}

impl SpecialPieces {
    /// The five pieces, padding first.
    pub fn all(&self) -> [&str; 5] {
        [&self.pad, &self.unk, &self.cls, &self.sep, &self.mask]
    }

    fn named(&self) -> [(&'static str, &str); 5] {
        [
            ("unk", &self.unk),
            ("cls", &self.cls),
            ("sep", &self.sep),
            ("mask", &self.mask),
            ("pad", &self.pad),
        ]
    }
}

/// Indices of the special pieces inside a vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialIds {
    pub unk: usize,
    pub cls: usize,
    pub sep: usize,
    pub mask: usize,
    pub pad: usize,
}

impl SpecialIds {
    pub fn contains(&self, index: usize) -> bool {
        [self.unk, self.cls, self.sep, self.mask, self.pad].contains(&index)
    }
}

/// An ordered, immutable piece table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordVocab {
    pieces: Vec<String>,
    index: HashMap<String, usize>,
    scheme: Scheme,
    specials: SpecialPieces,
    special_ids: SpecialIds,
}

/// Loads a vocabulary file using the scheme's default special pieces.
pub fn load_vocab(text: &str, scheme: Scheme) -> Result<SubwordVocab, VocabError> {
    SubwordVocab::from_text(text, scheme, scheme.default_specials())
}

impl SubwordVocab {
    /// One piece per line; file order defines the index. A single trailing
    /// newline is allowed.
    pub fn from_text(
        text: &str,
        scheme: Scheme,
        specials: SpecialPieces,
    ) -> Result<Self, VocabError> {
        let body = text.strip_suffix('\n').unwrap_or(text);
        let mut pieces = Vec::new();
        if !body.is_empty() {
            for (i, line) in body.split('\n').enumerate() {
                let piece = line.strip_suffix('\r').unwrap_or(line);
                if piece.is_empty() {
                    return Err(VocabError::EmptyPiece(i + 1));
                }
                pieces.push(piece.to_string());
            }
        }
        Self::from_pieces(pieces, scheme, specials)
    }

    pub fn from_pieces(
        pieces: Vec<String>,
        scheme: Scheme,
        specials: SpecialPieces,
    ) -> Result<Self, VocabError> {
        let mut index = HashMap::with_capacity(pieces.len());
        for (i, piece) in pieces.iter().enumerate() {
            if index.insert(piece.clone(), i).is_some() {
                return Err(VocabError::DuplicatePiece(i + 1));
            }
        }
        let lookup = |name: &str, piece: &str| {
            index
                .get(piece)
                .copied()
                .ok_or_else(|| VocabError::MissingSpecial(format!("{name} ({piece})")))
        };
        let named = specials.named();
        let special_ids = SpecialIds {
            unk: lookup(named[0].0, named[0].1)?,
            cls: lookup(named[1].0, named[1].1)?,
            sep: lookup(named[2].0, named[2].1)?,
            mask: lookup(named[3].0, named[3].1)?,
            pad: lookup(named[4].0, named[4].1)?,
        };
        Ok(SubwordVocab {
            pieces,
            index,
            scheme,
            specials,
            special_ids,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for piece in &self.pieces {
            out.push_str(piece);
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn specials(&self) -> &SpecialPieces {
        &self.specials
    }

    pub fn special_ids(&self) -> SpecialIds {
        self.special_ids
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    pub fn piece(&self, index: usize) -> Option<&str> {
        self.pieces.get(index).map(String::as_str)
    }

    pub fn id(&self, piece: &str) -> Option<usize> {
        self.index.get(piece).copied()
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.index.contains_key(piece)
    }

    /// Segments one word into piece indices.
    pub fn tokenize_word_ids(&self, word: &str) -> Vec<usize> {
        let chars: Vec<(usize, char)> = word.char_indices().collect();
        if chars.is_empty() {
            return Vec::new();
        }
        if chars.len() > MAX_WORD_CHARS {
            return vec![self.special_ids.unk];
        }
        match self.scheme {
            Scheme::ContinuationPrefix => self.wordpiece(word, &chars),
            Scheme::WordInitialMarker => self.sentencepiece(word),
        }
    }

    fn wordpiece(&self, word: &str, chars: &[(usize, char)]) -> Vec<usize> {
        let byte_at = |c: usize| chars.get(c).map_or(word.len(), |&(b, _)| b);
        let mut out = Vec::new();
        let mut start = 0;
        let mut candidate = String::new();
        while start < chars.len() {
            let mut found = None;
            for end in (start + 1..=chars.len()).rev() {
                candidate.clear();
                if start > 0 {
                    candidate.push_str(CONTINUATION_PREFIX);
                }
                candidate.push_str(&word[byte_at(start)..byte_at(end)]);
                if let Some(id) = self.id(&candidate) {
                    found = Some((id, end));
                    break;
                }
            }
            match found {
                Some((id, end)) => {
                    out.push(id);
                    start = end;
                }
                None => return vec![self.special_ids.unk],
            }
        }
        out
    }

    fn sentencepiece(&self, word: &str) -> Vec<usize> {
        let marked: String = std::iter::once(WORD_INITIAL_MARKER).chain(word.chars()).collect();
        let chars: Vec<(usize, char)> = marked.char_indices().collect();
        let byte_at = |c: usize| chars.get(c).map_or(marked.len(), |&(b, _)| b);
        let mut out = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let found = (start + 1..=chars.len())
                .rev()
                .find_map(|end| self.id(&marked[byte_at(start)..byte_at(end)]).map(|id| (id, end)));
            match found {
                Some((id, end)) => {
                    out.push(id);
                    start = end;
                }
                None => {
                    // consecutive unknown characters merge into one unknown piece
                    if out.last() != Some(&self.special_ids.unk) {
                        out.push(self.special_ids.unk);
                    }
                    start += 1;
                }
            }
        }
        out
    }
}

/// Segments one word into piece strings.
pub fn tokenize_word(vocab: &SubwordVocab, word: &str) -> Vec<String> {
    vocab
        .tokenize_word_ids(word)
        .into_iter()
        .map(|id| vocab.pieces[id].clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    pub piece: String,
    pub index: usize,
    pub word_index: usize,
    pub is_first_of_word: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PieceSequence {
    pub pieces: Vec<Piece>,
}

impl PieceSequence {
    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn strings(&self) -> Vec<&str> {
        self.pieces.iter().map(|p| p.piece.as_str()).collect()
    }

    pub fn ids(&self) -> Vec<usize> {
        self.pieces.iter().map(|p| p.index).collect()
    }
}

pub fn tokenize_words<'a>(
    vocab: &SubwordVocab,
    words: impl IntoIterator<Item = &'a str>,
) -> PieceSequence {
    let mut pieces = Vec::new();
    for (word_index, word) in words.into_iter().enumerate() {
        for (k, id) in vocab.tokenize_word_ids(word).into_iter().enumerate() {
            pieces.push(Piece {
                piece: vocab.pieces[id].clone(),
                index: id,
                word_index,
                is_first_of_word: k == 0,
            });
        }
    }
    PieceSequence { pieces }
}

pub fn tokenize_tweet(vocab: &SubwordVocab, tweet: &Tweet) -> PieceSequence {
    tokenize_words(vocab, tweet.words())
}

fn is_split_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Rule-based word tokenizer for raw text.
///
/// Splits on Unicode whitespace, then peels leading and trailing punctuation
/// runs off each chunk as separate words. Word-internal punctuation (as in
/// contractions) stays put, and a `#`/`@` directly followed by an alphanumeric
/// character is treated as part of the word.
pub fn word_tokenize(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        if chars.iter().all(|&c| is_split_punct(c)) {
            words.push(chunk.to_string());
            continue;
        }
        let protected_prefix = matches!(chars[0], '#' | '@')
            && chars.get(1).is_some_and(|c| c.is_alphanumeric());
        let mut lead = 0;
        if !protected_prefix {
            while is_split_punct(chars[lead]) {
                lead += 1;
            }
        }
        let mut tail = chars.len();
        while tail > lead + 1 && is_split_punct(chars[tail - 1]) {
            tail -= 1;
        }
        if lead > 0 {
            words.push(chars[..lead].iter().collect());
        }
        words.push(chars[lead..tail].iter().collect());
        if tail < chars.len() {
            words.push(chars[tail..].iter().collect());
        }
    }
    words
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSegmentation {
    pub word: String,
    pub pieces: Vec<String>,
}

impl WordSegmentation {
    pub fn non_first(&self) -> usize {
        self.pieces.len().saturating_sub(1)
    }
}

/// Non-first-token counts for a vocabulary over some words.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NftReport {
    pub word_count: usize,
    pub piece_count: usize,
    pub non_first_tokens: usize,
    /// Words whose segmentation produced an unknown piece.
    pub unk_words: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_word: Option<Vec<WordSegmentation>>,
}

impl NftReport {
    fn add_word(&mut self, vocab: &SubwordVocab, word: &str, keep: bool) {
        let ids = vocab.tokenize_word_ids(word);
        self.word_count += 1;
        self.piece_count += ids.len();
        self.non_first_tokens += ids.len().saturating_sub(1);
        if ids.contains(&vocab.special_ids.unk) {
            self.unk_words += 1;
        }
        if keep {
            self.per_word.get_or_insert_with(Vec::new).push(WordSegmentation {
                word: word.to_string(),
                pieces: ids.iter().map(|&i| vocab.pieces[i].clone()).collect(),
            });
        }
    }
}

/// Counts non-first tokens over the corpus' existing word tokens.
pub fn nft_analysis(vocab: &SubwordVocab, corpus: &Corpus) -> NftReport {
    nft_over_words(vocab, corpus.tweets.iter().flat_map(Tweet::words), false)
}

/// Same as [`nft_analysis`], keeping every word's segmentation.
pub fn nft_breakdown(vocab: &SubwordVocab, corpus: &Corpus) -> NftReport {
    nft_over_words(vocab, corpus.tweets.iter().flat_map(Tweet::words), true)
}

/// Non-first-token counts for raw text, split with [`word_tokenize`].
pub fn nft_analysis_text(vocab: &SubwordVocab, text: &str) -> NftReport {
    let words = word_tokenize(text);
    nft_over_words(vocab, words.iter().map(String::as_str), false)
}

pub fn nft_over_words<'a>(
    vocab: &SubwordVocab,
    words: impl IntoIterator<Item = &'a str>,
    keep_per_word: bool,
) -> NftReport {
    let mut report = NftReport {
        per_word: keep_per_word.then(Vec::new),
        ..NftReport::default()
    };
    for word in words {
        report.add_word(vocab, word, keep_per_word);
    }
    report
}
