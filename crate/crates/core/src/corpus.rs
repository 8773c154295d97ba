//! SentiMix-style code-mixed corpora.
//!
//! A corpus file is a sequence of records separated by a single blank line.
//! Each record starts with a header `meta <id> <sentiment>` and is followed
//! by one `<surface>\t<tag>` line per token:
//!
//! ```text
//! meta 1 positive
//! hello	lang1
//! mundo	lang2
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("line {line_no}: {reason}")]
    MalformedRecord { line_no: usize, reason: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
}

fn malformed(line_no: usize, reason: impl Into<String>) -> CorpusError {
    CorpusError::MalformedRecord {
        line_no,
        reason: reason.into(),
    }
}

/// Tweet-level sentiment. Ordered `Negative < Neutral < Positive`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Negative,
    Neutral,
    Positive,
}

impl SentimentLabel {
    pub const ALL: [SentimentLabel; 3] = [
        SentimentLabel::Negative,
        SentimentLabel::Neutral,
        SentimentLabel::Positive,
    ];

    /// Dense class index in report order (negative = 0).
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SentimentLabel::Negative => "negative",
            SentimentLabel::Neutral => "neutral",
            SentimentLabel::Positive => "positive",
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SentimentLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "negative" => Ok(SentimentLabel::Negative),
            "neutral" => Ok(SentimentLabel::Neutral),
            "positive" => Ok(SentimentLabel::Positive),
            other => Err(format!("unknown sentiment `{other}`")),
        }
    }
}

/// Token-level language label. `Lang1` is English, `Lang2` Spanish.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LanguageTag {
    Lang1,
    Lang2,
    Ambiguous,
    Other,
    Mixed,
    Ne,
    Unk,
    Fw,
}

impl LanguageTag {
    pub const ALL: [LanguageTag; 8] = [
        LanguageTag::Lang1,
        LanguageTag::Lang2,
        LanguageTag::Ambiguous,
        LanguageTag::Other,
        LanguageTag::Mixed,
        LanguageTag::Ne,
        LanguageTag::Unk,
        LanguageTag::Fw,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LanguageTag::Lang1 => "lang1",
            LanguageTag::Lang2 => "lang2",
            LanguageTag::Ambiguous => "ambiguous",
            LanguageTag::Other => "other",
            LanguageTag::Mixed => "mixed",
            LanguageTag::Ne => "ne",
            LanguageTag::Unk => "unk",
            LanguageTag::Fw => "fw",
        }
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LanguageTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LanguageTag::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown language tag `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub tag: LanguageTag,
}

impl Token {
    pub fn new(surface: impl Into<String>, tag: LanguageTag) -> Self {
        Token {
            surface: surface.into(),
            tag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub tokens: Vec<Token>,
    pub sentiment: SentimentLabel,
}

impl Tweet {
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }

    /// Checks the structural invariants a parsed tweet must satisfy.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() || self.id.chars().any(char::is_whitespace) {
            return Err(format!("invalid tweet id `{}`", self.id));
        }
        if self.tokens.is_empty() {
            return Err(format!("tweet `{}` has no tokens", self.id));
        }
        for token in &self.tokens {
            if token.surface.is_empty() {
                return Err(format!("tweet `{}` has an empty token", self.id));
            }
            if token.surface.contains(['\t', '\n', '\r']) {
                return Err(format!(
                    "tweet `{}` has a token containing a tab or newline",
                    self.id
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub tweets: Vec<Tweet>,
    pub provenance: String,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids and invalid tweets.
    pub fn new(tweets: Vec<Tweet>, provenance: impl Into<String>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for (i, tweet) in tweets.iter().enumerate() {
            tweet.validate().map_err(|r| malformed(i + 1, r))?;
            if !seen.insert(tweet.id.as_str()) {
                return Err(malformed(i + 1, format!("duplicate tweet id `{}`", tweet.id)));
            }
        }
        Ok(Corpus {
            tweets,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn labels(&self) -> Vec<SentimentLabel> {
        self.tweets.iter().map(|t| t.sentiment).collect()
    }
}

/// Parses corpus text. Record and line numbers in errors are 1-based.
pub fn parse_corpus(text: &str) -> Result<Corpus, CorpusError> {
    let mut tweets: Vec<Tweet> = Vec::new();
    let mut ids = HashSet::new();
    let mut current: Option<(usize, Tweet)> = None;

    let mut finish = |record: Option<(usize, Tweet)>, tweets: &mut Vec<Tweet>| {
        if let Some((header_line, tweet)) = record {
            if tweet.tokens.is_empty() {
                return Err(malformed(header_line, format!("tweet `{}` has no tokens", tweet.id)));
            }
            if !ids.insert(tweet.id.clone()) {
                return Err(malformed(header_line, format!("duplicate tweet id `{}`", tweet.id)));
            }
            tweets.push(tweet);
        }
        Ok(())
    };

    for (i, raw) in text.split('\n').enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            finish(current.take(), &mut tweets)?;
            continue;
        }
        match current.as_mut() {
            None => current = Some((line_no, parse_header(line, line_no)?)),
            Some((_, tweet)) => {
                let (surface, tag) = line
                    .split_once('\t')
                    .ok_or_else(|| malformed(line_no, "token line is missing a tab-separated tag"))?;
                if surface.is_empty() {
                    return Err(malformed(line_no, "empty token surface"));
                }
                let tag = tag.parse().map_err(|e: String| malformed(line_no, e))?;
                tweet.tokens.push(Token::new(surface, tag));
            }
        }
    }
    finish(current.take(), &mut tweets)?;

    Ok(Corpus {
        tweets,
        provenance: String::new(),
    })
}

fn parse_header(line: &str, line_no: usize) -> Result<Tweet, CorpusError> {
    let mut fields = line.split_whitespace();
    if fields.next() != Some("meta") {
        return Err(malformed(line_no, "expected a `meta <id> <sentiment>` header"));
    }
    let id = fields
        .next()
        .ok_or_else(|| malformed(line_no, "header is missing the tweet id"))?;
    let sentiment = fields
        .next()
        .ok_or_else(|| malformed(line_no, "header is missing the sentiment"))?
        .parse()
        .map_err(|e: String| malformed(line_no, e))?;
    if fields.next().is_some() {
        return Err(malformed(line_no, "trailing fields after the sentiment"));
    }
    Ok(Tweet {
        id: id.to_string(),
        tokens: Vec::new(),
        sentiment,
    })
}

/// Serializes a corpus; `parse_corpus` inverts this exactly.
pub fn serialize_corpus(corpus: &Corpus) -> String {
    let mut out = String::new();
    for tweet in &corpus.tweets {
        out.push_str("meta ");
        out.push_str(&tweet.id);
        out.push(' ');
        out.push_str(tweet.sentiment.as_str());
        out.push('\n');
        for token in &tweet.tokens {
            out.push_str(&token.surface);
            out.push('\t');
            out.push_str(token.tag.as_str());
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Seeded shuffle followed by a cut at `floor(train_fraction * n)`.
pub fn split_corpus(
    corpus: &Corpus,
    train_fraction: f64,
    seed: u64,
) -> Result<(Corpus, Corpus), CorpusError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(train_fraction));
    }
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let n = corpus.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (train_fraction * n as f64).floor() as usize;
    let take = |idx: &[usize], suffix: &str| Corpus {
        tweets: idx.iter().map(|&i| corpus.tweets[i].clone()).collect(),
        provenance: format!("{}#{suffix}", corpus.provenance),
    };
    Ok((take(&order[..cut], "train"), take(&order[cut..], "dev")))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub sentiment_counts: BTreeMap<SentimentLabel, usize>,
    pub tag_counts: BTreeMap<LanguageTag, usize>,
    pub tweet_count: usize,
    pub token_count: usize,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut sentiment_counts: BTreeMap<_, _> =
        SentimentLabel::ALL.iter().map(|&s| (s, 0)).collect();
    let mut tag_counts: BTreeMap<_, _> = LanguageTag::ALL.iter().map(|&t| (t, 0)).collect();
    let mut token_count = 0;
    for tweet in &corpus.tweets {
        *sentiment_counts.get_mut(&tweet.sentiment).unwrap() += 1;
        for token in &tweet.tokens {
            *tag_counts.get_mut(&token.tag).unwrap() += 1;
            token_count += 1;
        }
    }
    CorpusStats {
        sentiment_counts,
        tag_counts,
        tweet_count: corpus.len(),
        token_count,
    }
}
