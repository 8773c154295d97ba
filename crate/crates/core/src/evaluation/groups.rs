use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{confusion, metrics, EvalError, EvalReport};
use crate::corpus::{LanguageTag, SentimentLabel, Tweet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguageGroup {
    EnglishDominant,
    SpanishDominant,
    Other,
    Unassigned,
}

impl LanguageGroup {
    pub const ALL: [LanguageGroup; 4] = [
        LanguageGroup::EnglishDominant,
        LanguageGroup::SpanishDominant,
        LanguageGroup::Other,
        LanguageGroup::Unassigned,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LanguageGroup::EnglishDominant => "english_dominant",
            LanguageGroup::SpanishDominant => "spanish_dominant",
            LanguageGroup::Other => "other",
            LanguageGroup::Unassigned => "unassigned",
        }
    }
}

impl fmt::Display for LanguageGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What the English/Spanish dominance ratio is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioDenominator {
    /// `lang1 / (lang1 + lang2)`
    LanguagePair,
    /// `lang1 / all tokens`
    AllTokens,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroupThresholds {
    pub dominant: f64,
    pub other: f64,
    /// `>=` comparisons when true, `>` when false.
    pub inclusive: bool,
    pub denominator: RatioDenominator,
}

impl Default for GroupThresholds {
    fn default() -> Self {
        GroupThresholds {
            dominant: 0.75,
            other: 0.4,
            inclusive: true,
            denominator: RatioDenominator::LanguagePair,
        }
    }
}

impl GroupThresholds {
    fn reaches(&self, value: f64, threshold: f64) -> bool {
        if self.inclusive {
            value >= threshold
        } else {
            value > threshold
        }
    }
}

/// Buckets a tweet by its token-level language tags.
///
/// With `e`, `s`, `m` the counts of lang1, lang2 and every other tag and `t`
/// the token total: `m/t` reaching the other threshold wins first, then
/// English and Spanish dominance of the ratio; anything else is unassigned.
pub fn language_group(tweet: &Tweet, thresholds: &GroupThresholds) -> LanguageGroup {
    let (mut e, mut s, mut m) = (0usize, 0usize, 0usize);
    for token in &tweet.tokens {
        match token.tag {
            LanguageTag::Lang1 => e += 1,
            LanguageTag::Lang2 => s += 1,
            _ => m += 1,
        }
    }
    let t = e + s + m;
    if t == 0 {
        return LanguageGroup::Unassigned;
    }
    if thresholds.reaches(m as f64 / t as f64, thresholds.other) {
        return LanguageGroup::Other;
    }
    if e + s == 0 {
        return LanguageGroup::Unassigned;
    }
    let den = match thresholds.denominator {
        RatioDenominator::LanguagePair => (e + s) as f64,
        RatioDenominator::AllTokens => t as f64,
    };
    if thresholds.reaches(e as f64 / den, thresholds.dominant) {
        LanguageGroup::EnglishDominant
    } else if thresholds.reaches(s as f64 / den, thresholds.dominant) {
        LanguageGroup::SpanishDominant
    } else {
        LanguageGroup::Unassigned
    }
}

/// Metrics restricted to each language group's members; empty groups are
/// left out.
pub fn grouped_report(
    gold: &[SentimentLabel],
    pred: &[SentimentLabel],
    tweets: &[Tweet],
    thresholds: &GroupThresholds,
) -> Result<BTreeMap<LanguageGroup, EvalReport>, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch { gold: gold.len(), pred: pred.len() });
    }
    if tweets.len() != gold.len() {
        return Err(EvalError::LengthMismatch { gold: tweets.len(), pred: gold.len() });
    }
    let mut members: BTreeMap<LanguageGroup, (Vec<SentimentLabel>, Vec<SentimentLabel>)> = BTreeMap::new();
    for ((tweet, &g), &p) in tweets.iter().zip(gold).zip(pred) {
        let entry = members.entry(language_group(tweet, thresholds)).or_default();
        entry.0.push(g);
        entry.1.push(p);
    }
    members
        .into_iter()
        .map(|(group, (g, p))| Ok((group, metrics(&confusion(&g, &p)?)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;
    use LanguageTag::*;
    use SentimentLabel::*;

    fn tagged(id: &str, counts: &[(LanguageTag, usize)]) -> Tweet {
        let tokens = counts
            .iter()
            .flat_map(|&(tag, k)| (0..k).map(move |i| Token::new(format!("w{i}"), tag)))
            .collect();
        Tweet { id: id.into(), tokens, sentiment: Neutral }
    }

    #[test]
    fn boundary_cases() {
        let th = GroupThresholds::default();
        assert_eq!(
            language_group(&tagged("a", &[(Lang1, 6), (Lang2, 2), (Other, 2)]), &th),
            LanguageGroup::EnglishDominant
        );
        assert_eq!(
            language_group(&tagged("b", &[(Lang2, 3), (Lang1, 1)]), &th),
            LanguageGroup::SpanishDominant
        );
        assert_eq!(language_group(&tagged("c", &[(Other, 4)]), &th), LanguageGroup::Other);
        assert_eq!(
            language_group(&tagged("d", &[(Lang1, 5), (Lang2, 5)]), &th),
            LanguageGroup::Unassigned
        );
        // m/t exactly 0.4 goes to Other even though English would dominate
        assert_eq!(
            language_group(&tagged("e", &[(Lang1, 6), (Ne, 2), (Ambiguous, 2)]), &th),
            LanguageGroup::Other
        );
        assert_eq!(
            language_group(&tagged("f", &[(Lang1, 7), (Ne, 2), (Fw, 1), (Mixed, 1)]), &th),
            LanguageGroup::EnglishDominant
        );
    }

    #[test]
    fn exclusive_and_all_token_variants() {
        let exclusive = GroupThresholds { inclusive: false, ..Default::default() };
        assert_eq!(
            language_group(&tagged("a", &[(Lang1, 6), (Lang2, 2), (Other, 2)]), &exclusive),
            LanguageGroup::Unassigned
        );
        assert_eq!(
            language_group(&tagged("b", &[(Lang1, 6), (Other, 4)]), &exclusive),
            LanguageGroup::EnglishDominant
        );
        let all = GroupThresholds { denominator: RatioDenominator::AllTokens, ..Default::default() };
        // 6/10 of all tokens is below 0.75 although 6/8 of the pair reaches it
        assert_eq!(
            language_group(&tagged("c", &[(Lang1, 6), (Lang2, 2), (Other, 2)]), &all),
            LanguageGroup::Unassigned
        );
    }

    #[test]
    fn grouped_matches_hand_tally() {
        let tweets = vec![
            tagged("1", &[(Lang1, 4)]),
            tagged("2", &[(Lang1, 4)]),
            tagged("3", &[(Lang2, 4)]),
            tagged("4", &[(Lang2, 4)]),
            tagged("5", &[(Lang2, 3), (Lang1, 1)]),
        ];
        let gold = [Positive, Negative, Positive, Neutral, Neutral];
        let pred = [Positive, Positive, Positive, Neutral, Positive];
        let th = GroupThresholds::default();
        let groups = grouped_report(&gold, &pred, &tweets, &th).unwrap();
        assert_eq!(groups.len(), 2);
        let en = &groups[&LanguageGroup::EnglishDominant];
        // english: gold (pos, neg), pred (pos, pos): pos P=1/2 R=1 F=2/3, neg F=0
        assert_eq!(en.total, 2);
        assert!((en.accuracy - 0.5).abs() < 1e-12);
        assert!((en.weighted_f1 - (2.0 / 3.0) / 2.0).abs() < 1e-12);
        let es = &groups[&LanguageGroup::SpanishDominant];
        // spanish: gold (pos, neu, neu), pred (pos, neu, pos):
        // pos P=1/2 R=1 F=2/3 (support 1), neu P=1 R=1/2 F=2/3 (support 2)
        assert_eq!(es.total, 3);
        assert!((es.weighted_f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((es.per_class[&Neutral].recall - 0.5).abs() < 1e-12);

        let one_group = grouped_report(&gold[..2], &pred[..2], &tweets[..2], &th).unwrap();
        let global = metrics(&confusion(&gold[..2], &pred[..2]).unwrap()).unwrap();
        assert_eq!(one_group[&LanguageGroup::EnglishDominant], global);

        assert!(grouped_report(&gold, &pred[..4], &tweets, &th).is_err());
    }
}
