//! Overall and per-language-group metrics for a toy set of predictions.

use codemix::corpus::{Corpus, LanguageTag, SentimentLabel, Token, Tweet};
use codemix::evaluation::{language_group, EvaluationReport, GroupThresholds};

fn tweet(id: &str, tags: &[LanguageTag], sentiment: SentimentLabel) -> Tweet {
    let tokens = tags.iter().enumerate().map(|(i, &t)| Token::new(format!("w{i}"), t)).collect();
    Tweet { id: id.into(), tokens, sentiment }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    use LanguageTag::*;
    use SentimentLabel::*;
    let gold = Corpus::new(
        vec![
            tweet("1", &[Lang1, Lang1, Lang1, Lang2], Positive),
            tweet("2", &[Lang2, Lang2, Lang2, Lang1], Negative),
            tweet("3", &[Lang1, Other, Other, Lang2, Lang1], Neutral),
            tweet("4", &[Lang1, Lang2], Positive),
            tweet("5", &[Lang1, Lang1, Lang1, Lang1], Neutral),
        ],
        "toy",
    )?;
    let pred = [Positive, Neutral, Neutral, Negative, Neutral];
    let th = GroupThresholds::default();
    for t in &gold.tweets {
        println!("tweet {} -> {}", t.id, language_group(t, &th));
    }
    let report = EvaluationReport::build(&gold, &pred, Some(&th))?;
    let line = |name: &str, r: &codemix::evaluation::EvalReport| {
        println!("{name:<17} n={} P {:.3} R {:.3} F1 {:.3}", r.total, r.weighted_precision, r.weighted_recall, r.weighted_f1);
    };
    line("all", &report.overall);
    for (group, r) in report.groups.iter().flatten() {
        line(group.as_str(), r);
    }
    Ok(())
}
