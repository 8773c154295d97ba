//! Synthetic English-Spanish code-mixed tweets with planted sentiment words.
//!
//! Each tweet draws its own Spanish share around `mix_ratio`, fills a random
//! length with neutral words from the two lexicons (plus a few untranslatable
//! "other" tokens), then plants one to three sentiment words of the tweet's
//! polarity. Neutral tweets get none. A fraction `label_noise` of labels is
//! redrawn uniformly from the other two classes afterwards.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, LanguageTag, SentimentLabel, Token, Tweet};
use crate::subword::{Scheme, SubwordVocab, VocabError, CONTINUATION_PREFIX, WORD_INITIAL_MARKER};

pub const ENGLISH_NEUTRAL: &[&str] = &[
    "the", "a", "i", "you", "we", "they", "it", "is", "are", "was", "to", "of", "and", "in", "on", "at", "for",
    "with", "my", "your", "this", "that", "today", "tomorrow", "night", "morning", "work", "school", "home",
    "game", "movie", "song", "friend", "friends", "family", "phone", "car", "bus", "class", "team", "time",
    "week", "weekend", "people", "going", "watching", "eating", "just", "now", "still", "again", "about",
    "after", "before", "got", "see", "know", "think", "say", "want",
];

pub const SPANISH_NEUTRAL: &[&str] = &[
    "el", "la", "los", "las", "un", "una", "yo", "tu", "nosotros", "ellos", "es", "son", "era", "que", "de",
    "y", "en", "por", "para", "con", "mi", "su", "este", "esa", "hoy", "mañana", "noche", "trabajo",
    "escuela", "casa", "partido", "película", "canción", "amigo", "amigos", "familia", "teléfono", "carro",
    "clase", "equipo", "tiempo", "semana", "gente", "voy", "viendo", "comiendo", "solo", "ahora", "todavía",
    "otra", "vez", "sobre", "después", "antes", "tengo", "ver", "sé", "creo", "dice", "quiero",
];

pub const ENGLISH_POSITIVE: &[&str] = &[
    "love", "great", "happy", "awesome", "amazing", "best", "good", "beautiful", "fun", "excited", "perfect",
    "thanks", "wonderful", "glad", "nice",
];

pub const ENGLISH_NEGATIVE: &[&str] = &[
    "hate", "sad", "worst", "bad", "angry", "tired", "sick", "annoying", "terrible", "awful", "boring",
    "ugly", "stupid", "hurts", "upset",
];

pub const SPANISH_POSITIVE: &[&str] = &[
    "amo", "feliz", "genial", "increíble", "mejor", "bueno", "hermosa", "divertido", "emocionado", "perfecto",
    "gracias", "maravilloso", "contento", "bonito", "encanta",
];

pub const SPANISH_NEGATIVE: &[&str] = &[
    "odio", "triste", "peor", "malo", "enojado", "cansado", "enfermo", "molesto", "terrible", "horrible",
    "aburrido", "feo", "estúpido", "duele", "harto",
];

/// Tokens tagged `other`: mentions, hashtags, links and punctuation runs.
pub const OTHER_TOKENS: &[&str] = &["@user", "#tbt", "#sxsw", "http://t.co/x", "...", "!!", "?", "jajaja", "lol", "xd"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SyntheticError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
}

/// Generator parameters. Defaults reproduce the benchmark used by the
/// examples and tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub size: usize,
    pub seed: u64,
    /// Neutral words used per language (prefix of the built-in lexicon).
    pub neutral_words: usize,
    /// Sentiment words used per language and polarity.
    pub sentiment_words: usize,
    /// Mean share of non-English tokens per tweet; 0 gives all-English tweets.
    pub mix_ratio: f64,
    /// Part of the non-English share drawn from the `other` tokens.
    pub other_share: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub label_noise: f64,
    /// Class weights, negative/neutral/positive.
    pub priors: [f64; 3],
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            size: 1000,
            seed: 0,
            neutral_words: 60,
            sentiment_words: 15,
            mix_ratio: 0.4,
            other_share: 0.1,
            min_len: 5,
            max_len: 14,
            label_noise: 0.05,
            // training-set label counts of the shared task
            priors: [2023.0, 3794.0, 6005.0],
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<(), SyntheticError> {
        let fail = |m: String| Err(SyntheticError::InvalidParams(m));
        if self.size == 0 {
            return fail("size must be positive".into());
        }
        let max_neutral = ENGLISH_NEUTRAL.len().min(SPANISH_NEUTRAL.len());
        if self.neutral_words == 0 || self.neutral_words > max_neutral {
            return fail(format!("neutral_words must be in 1..={max_neutral}"));
        }
        if self.sentiment_words == 0 || self.sentiment_words > ENGLISH_POSITIVE.len() {
            return fail(format!("sentiment_words must be in 1..={}", ENGLISH_POSITIVE.len()));
        }
        for (name, v) in [("mix_ratio", self.mix_ratio), ("other_share", self.other_share)] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} {v} outside [0, 1]"));
            }
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return fail(format!("label_noise {} outside [0, 1)", self.label_noise));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return fail("need 1 <= min_len <= max_len".into());
        }
        if self.priors.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || self.priors.iter().sum::<f64>() <= 0.0 {
            return fail("priors must be non-negative with a positive sum".into());
        }
        Ok(())
    }

    fn lexicon(&self, lang: LanguageTag, label: SentimentLabel) -> &'static [&'static str] {
        let en = lang == LanguageTag::Lang1;
        match (label, en) {
            (SentimentLabel::Neutral, true) => &ENGLISH_NEUTRAL[..self.neutral_words],
            (SentimentLabel::Neutral, false) => &SPANISH_NEUTRAL[..self.neutral_words],
            (SentimentLabel::Positive, true) => &ENGLISH_POSITIVE[..self.sentiment_words],
            (SentimentLabel::Positive, false) => &SPANISH_POSITIVE[..self.sentiment_words],
            (SentimentLabel::Negative, true) => &ENGLISH_NEGATIVE[..self.sentiment_words],
            (SentimentLabel::Negative, false) => &SPANISH_NEGATIVE[..self.sentiment_words],
        }
    }

    /// Every word the generator can emit, in a fixed order.
    pub fn all_words(&self) -> Vec<&'static str> {
        let mut words = Vec::new();
        for lang in [LanguageTag::Lang1, LanguageTag::Lang2] {
            for label in [SentimentLabel::Neutral, SentimentLabel::Positive, SentimentLabel::Negative] {
                words.extend_from_slice(self.lexicon(lang, label));
            }
        }
        words.extend_from_slice(OTHER_TOKENS);
        let mut seen = std::collections::HashSet::new();
        words.retain(|w| seen.insert(*w));
        words
    }

    /// Sentiment words of one polarity across both languages.
    pub fn sentiment_lexicon(&self, label: SentimentLabel) -> Vec<&'static str> {
        let mut words = self.lexicon(LanguageTag::Lang1, label).to_vec();
        words.extend_from_slice(self.lexicon(LanguageTag::Lang2, label));
        words
    }
}

/// Generates `params.size` tweets; identical parameters give identical output.
pub fn generate(params: &SyntheticParams) -> Result<Corpus, SyntheticError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let labels = WeightedIndex::new(params.priors).expect("validated priors");
    let mut tweets = Vec::with_capacity(params.size);
    for i in 0..params.size {
        let mut label = SentimentLabel::from_index(labels.sample(&mut rng)).expect("three classes");
        let share = if params.mix_ratio > 0.0 {
            (rng.gen::<f64>() * 2.0 * params.mix_ratio).min(1.0)
        } else {
            0.0
        };
        let pick_lang = |rng: &mut ChaCha8Rng| -> LanguageTag {
            if rng.gen::<f64>() >= share {
                LanguageTag::Lang1
            } else if rng.gen::<f64>() < params.other_share {
                LanguageTag::Other
            } else {
                LanguageTag::Lang2
            }
        };
        let len = rng.gen_range(params.min_len..=params.max_len);
        let mut tokens: Vec<Token> = (0..len)
            .map(|_| {
                let lang = pick_lang(&mut rng);
                let word = match lang {
                    LanguageTag::Other => OTHER_TOKENS[rng.gen_range(0..OTHER_TOKENS.len())],
                    _ => {
                        let lex = params.lexicon(lang, SentimentLabel::Neutral);
                        lex[rng.gen_range(0..lex.len())]
                    }
                };
                Token::new(word, lang)
            })
            .collect();
        if label != SentimentLabel::Neutral {
            let planted = rng.gen_range(1..=3);
            for _ in 0..planted {
                let lang = match pick_lang(&mut rng) {
                    LanguageTag::Other => LanguageTag::Lang1,
                    l => l,
                };
                let lex = params.lexicon(lang, label);
                let word = lex[rng.gen_range(0..lex.len())];
                let at = rng.gen_range(0..=tokens.len());
                tokens.insert(at, Token::new(word, lang));
            }
        }
        if rng.gen::<f64>() < params.label_noise {
            let shift = rng.gen_range(1..3);
            label = SentimentLabel::from_index((label.index() + shift) % 3).expect("three classes");
        }
        tweets.push(Tweet { id: format!("{}", i + 1), tokens, sentiment: label });
    }
    Ok(Corpus::new(tweets, format!("synthetic(seed={}, size={})", params.seed, params.size))
        .expect("generated ids are unique"))
}

/// Subword vocabulary covering the generator output: the specials, every
/// lexicon word as a whole piece, and single characters in both word-initial
/// and continuation form so that any string stays representable.
pub fn synthetic_vocab(params: &SyntheticParams, scheme: Scheme) -> Result<SubwordVocab, VocabError> {
    let specials = scheme.default_specials();
    let mut pieces: Vec<String> = specials.all().iter().map(|s| s.to_string()).collect();
    let words = params.all_words();
    let mut chars: Vec<char> = words.iter().flat_map(|w| w.chars()).collect();
    chars.sort_unstable();
    chars.dedup();
    match scheme {
        Scheme::ContinuationPrefix => {
            pieces.extend(words.iter().map(|w| w.to_string()));
            pieces.extend(chars.iter().map(|c| c.to_string()));
            pieces.extend(chars.iter().map(|c| format!("{CONTINUATION_PREFIX}{c}")));
        }
        Scheme::WordInitialMarker => {
            pieces.extend(words.iter().map(|w| format!("{WORD_INITIAL_MARKER}{w}")));
            pieces.extend(chars.iter().map(|c| format!("{WORD_INITIAL_MARKER}{c}")));
            pieces.extend(chars.iter().map(|c| c.to_string()));
        }
    }
    let mut seen = std::collections::HashSet::new();
    pieces.retain(|p| seen.insert(p.clone()));
    SubwordVocab::from_pieces(pieces, scheme, specials)
}
