//! Acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! The process exits 0 even when a criterion fails so that the rest of the
//! test suite still runs; set `ACCEPTANCE_STRICT=1` to turn any FAIL into a
//! non-zero exit, and `ACCEPTANCE_ONLY=6,8` to run a subset.

use std::collections::HashSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use codemix::corpus::{parse_corpus, serialize_corpus, split_corpus, LanguageTag, SentimentLabel, Token, Tweet};
use codemix::evaluation::{confusion, language_group, metrics, ConfusionMatrix, GroupThresholds, LanguageGroup};
use codemix::models::{encode_batch, BlstmConfig, BlstmModel, ModelConfig, ModelError, TransformerModel, WordVocab};
use codemix::models::encode_words;
use codemix::subword::{
    load_vocab, nft_analysis_text, tokenize_word, word_tokenize, Scheme, SubwordVocab,
};
use codemix::synthetic::{generate, synthetic_vocab, SyntheticParams};
use codemix::tensor::{gradcheck, ParamSet, Tensor, TensorError};
use codemix::training::{
    apply_mlm_masking, head_seed, predict_transformer, train_transformer, two_step_finetune, AdamConfig, Objective,
    OptimizerState, TrainPlan, TransformerTrainer,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SENTENCE: &str = "Since I started working ya ni disfruto la vida lol";

type Outcome = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

const VOCABS: [&str; 4] = ["english_wp", "spanish_wp", "multilingual_wp", "xlmr_sp"];

fn fixture_vocab(row: usize) -> SubwordVocab {
    let scheme = if row == 4 { Scheme::WordInitialMarker } else { Scheme::ContinuationPrefix };
    let text = std::fs::read_to_string(fixture(&format!("{}.vocab", VOCABS[row - 1]))).unwrap();
    load_vocab(&text, scheme).unwrap()
}

fn segment(vocab: &SubwordVocab, text: &str) -> Vec<String> {
    word_tokenize(text).iter().flat_map(|w| tokenize_word(vocab, w)).collect()
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    if took <= limit {
        Ok(())
    } else {
        Err(format!("took {took:.1?}, limit {limit:?}"))
    }
}

fn example_segmentations() -> Outcome {
    let start = Instant::now();
    let expected: [&[&str]; 4] = [
        &["Since", "I", "started", "working", "ya", "ni", "di", "##s", "##f", "##ru", "##to", "la", "v", "##ida", "lo", "##l"],
        &["Sin", "##ce", "I", "sta", "##r", "##ted", "w", "##or", "##k", "##ing", "ya", "ni", "disfru", "##to", "la", "vida", "lo", "##l"],
        &["Since", "I", "started", "working", "ya", "ni", "dis", "##fr", "##uto", "la", "vida", "lo", "##l"],
        &["▁Since", "▁I", "▁started", "▁working", "▁ya", "▁ni", "▁dis", "fru", "to", "▁la", "▁vida", "▁lol"],
    ];
    for (i, want) in expected.iter().enumerate() {
        let got = segment(&fixture_vocab(i + 1), SENTENCE);
        if got != *want {
            return Err(format!("row {}: got {got:?}", i + 1));
        }
    }
    within(Duration::from_secs(1), start)?;
    Ok("rows 1-4 match exactly".into())
}

fn nft_counts() -> Outcome {
    let got: Vec<usize> = (1..=4).map(|r| nft_analysis_text(&fixture_vocab(r), SENTENCE).non_first_tokens).collect();
    if got == [6, 8, 3, 2] {
        Ok(format!("{got:?}"))
    } else {
        Err(format!("got {got:?}, want [6, 8, 3, 2]"))
    }
}

/// Longest-prefix match, recursing on the remainder without backtracking.
fn naive_longest_match(set: &HashSet<String>, rest: &str, first: bool) -> Option<Vec<String>> {
    if rest.is_empty() {
        return Some(Vec::new());
    }
    let prefix = if first { "" } else { "##" };
    let cut = (1..=rest.len()).rev().find(|&n| set.contains(&format!("{prefix}{}", &rest[..n])))?;
    let mut tail = naive_longest_match(set, &rest[cut..], false)?;
    tail.insert(0, format!("{prefix}{}", &rest[..cut]));
    Some(tail)
}

fn tokenizer_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let alphabet = ['a', 'b', 'c', 'd'];
    let draw = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| -> String {
        let n = rng.gen_range(lo..=hi);
        (0..n).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
    };
    let specials = ["[UNK]", "[CLS]", "[SEP]", "[MASK]", "[PAD]"];
    for case in 0..10_000 {
        let mut set = HashSet::new();
        for _ in 0..rng.gen_range(0..16) {
            let body = draw(&mut rng, 1, 3);
            set.insert(if rng.gen_bool(0.5) { format!("##{body}") } else { body });
        }
        let word = draw(&mut rng, 1, 8);
        let mut pieces: Vec<String> = specials.iter().map(|s| s.to_string()).collect();
        let mut sorted: Vec<&String> = set.iter().collect();
        sorted.sort();
        pieces.extend(sorted.into_iter().cloned());
        let vocab = SubwordVocab::from_pieces(pieces, Scheme::ContinuationPrefix, Scheme::ContinuationPrefix.default_specials())
            .map_err(|e| e.to_string())?;
        let want = naive_longest_match(&set, &word, true).unwrap_or_else(|| vec!["[UNK]".into()]);
        let got = tokenize_word(&vocab, &word);
        if got != want {
            return Err(format!("case {case}: word {word:?}, got {got:?}, oracle {want:?}"));
        }
    }
    within(Duration::from_secs(10), start)?;
    Ok(format!("10000 cases agree in {:.2?}", start.elapsed()))
}

fn random_matrix(rng: &mut ChaCha8Rng) -> ConfusionMatrix {
    loop {
        let mut counts = [[0usize; 3]; 3];
        for row in counts.iter_mut() {
            for c in row.iter_mut() {
                *c = if rng.gen_bool(0.3) { 0 } else { rng.gen_range(0..60) };
            }
        }
        let cm = ConfusionMatrix::from_counts(counts);
        if cm.total() > 0 {
            return cm;
        }
    }
}

fn recall_is_accuracy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let r = metrics(&random_matrix(&mut rng)).map_err(|e| e.to_string())?;
        worst = worst.max((r.weighted_recall - r.accuracy).abs());
    }
    if worst <= 1e-12 {
        Ok(format!("max |recall - accuracy| = {worst:.1e}"))
    } else {
        Err(format!("max |recall - accuracy| = {worst:.3e}"))
    }
}

fn ten_sample_fixture() -> Outcome {
    use SentimentLabel::*;
    // hand tally: positive 3 right + 1 as neutral, neutral 2 right + 1 as
    // negative, negative 3 right
    let pairs = [
        (Positive, Positive, 3),
        (Positive, Neutral, 1),
        (Neutral, Neutral, 2),
        (Neutral, Negative, 1),
        (Negative, Negative, 3),
    ];
    let (mut gold, mut pred) = (Vec::new(), Vec::new());
    for (g, p, k) in pairs {
        for _ in 0..k {
            gold.push(g);
            pred.push(p);
        }
    }
    let r = metrics(&confusion(&gold, &pred).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let checks = [("weighted_f1", r.weighted_f1, 0.8), ("weighted_precision", r.weighted_precision, 0.825), ("accuracy", r.accuracy, 0.8)];
    for (name, got, want) in checks {
        if (got - want).abs() > 1e-12 {
            return Err(format!("{name} = {got}, want {want}"));
        }
    }
    Ok(format!("F1 {:.3}, P {:.3}, acc {:.3}", r.weighted_f1, r.weighted_precision, r.accuracy))
}

fn unwrap_tensor(e: ModelError) -> TensorError {
    match e {
        ModelError::Tensor(t) => t,
        other => panic!("{other}"),
    }
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let params = SyntheticParams { size: 4, seed: 11, neutral_words: 4, sentiment_words: 2, ..SyntheticParams::default() };
    let data = generate(&params).map_err(|e| e.to_string())?;
    let vocab = synthetic_vocab(&params, Scheme::ContinuationPrefix).map_err(|e| e.to_string())?;
    let config = ModelConfig { max_seq_len: 8, ..ModelConfig::desk(vocab.len()) };
    let model = TransformerModel::new(config, 21).map_err(|e| e.to_string())?;
    let batch = encode_batch(&vocab, &data.tweets[..2], config.max_seq_len);
    let batch = apply_mlm_masking(&batch, &vocab, 0.3, 5).map_err(|e| e.to_string())?;
    let t = gradcheck(model.params(), |_| true, |tape, vars| {
        let (_, cls) = model.classify_loss(tape, vars, &batch, None).map_err(unwrap_tensor)?;
        let (_, mlm) = model.mlm_graph(tape, vars, &batch, None).map_err(unwrap_tensor)?;
        tape.add(cls, mlm)
    })
    .map_err(|e| e.to_string())?;

    let words = WordVocab::build(&data, 1);
    let blstm = BlstmModel::new(BlstmConfig::desk(words.len()), 22).map_err(|e| e.to_string())?;
    let tweets: Vec<&Tweet> = data.tweets.iter().collect();
    let wb = encode_words(&words, &tweets, 8);
    let b = gradcheck(blstm.params(), |_| true, |tape, vars| {
        Ok(blstm.classify_loss(tape, vars, &wb).map_err(unwrap_tensor)?.1)
    })
    .map_err(|e| e.to_string())?;
    within(Duration::from_secs(120), start)?;
    let detail = format!(
        "transformer {} coords max err {:.2e} (abs {:.2e}); blstm {} coords max err {:.2e} (abs {:.2e}); {:.1?}",
        t.coordinates,
        t.max_rel_error,
        t.max_abs_error,
        b.coordinates,
        b.max_rel_error,
        b.max_abs_error,
        start.elapsed()
    );
    if t.max_rel_error <= 1e-4 && b.max_rel_error <= 1e-4 {
        Ok(detail)
    } else {
        Err(format!("{detail}; worst {:?} {:?} / {:?} {:?}", t.worst, t.worst_values, b.worst, b.worst_values))
    }
}

/// Full-batch classification steps until every training tweet is right.
fn overfit_steps(seed: u64) -> Result<Option<usize>, String> {
    let params = SyntheticParams { size: 20, seed: 100 + seed, ..SyntheticParams::default() };
    let data = generate(&params).map_err(|e| e.to_string())?;
    let vocab = synthetic_vocab(&params, Scheme::ContinuationPrefix).map_err(|e| e.to_string())?;
    let config = ModelConfig::desk(vocab.len());
    let plan = TrainPlan {
        seed,
        batch_size: 20,
        adam: AdamConfig { lr: 3e-3, ..AdamConfig::default() },
        ..TrainPlan::desk(Objective::Cls)
    };
    let mut model = TransformerModel::new(config, seed).map_err(|e| e.to_string())?;
    model.reset_classifier(head_seed(seed));
    let mut trainer = TransformerTrainer::new(model, &plan);
    let batch = encode_batch(&vocab, &data.tweets, config.max_seq_len);
    let gold = data.labels();
    for step in 1..=500 {
        trainer.step(&batch, Objective::Cls).map_err(|e| e.to_string())?;
        let pred = predict_transformer(&trainer.model, &vocab, &data.tweets).map_err(|e| e.to_string())?;
        if pred == gold {
            return Ok(Some(step));
        }
    }
    Ok(None)
}

fn overfit_smoke() -> Outcome {
    let mut reached = 0;
    let mut notes = Vec::new();
    for seed in 0..5 {
        let start = Instant::now();
        let steps = overfit_steps(seed)?;
        let took = start.elapsed();
        if steps.is_some() && took <= Duration::from_secs(60) {
            reached += 1;
        }
        notes.push(format!("seed {seed}: {} in {took:.1?}", steps.map_or("not reached".into(), |s| format!("{s} steps"))));
    }
    let detail = format!("{reached}/5 seeds at 100% ({})", notes.join(", "));
    if reached >= 4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn two_step_benefit() -> Outcome {
    let start = Instant::now();
    let params = SyntheticParams { size: 2500, seed: 2024, ..SyntheticParams::default() };
    let all = generate(&params).map_err(|e| e.to_string())?;
    let mut train = all.clone();
    let dev_tweets = train.tweets.split_off(2000);
    let dev = codemix::corpus::Corpus { tweets: dev_tweets, provenance: "synthetic#dev".into() };
    let vocab = synthetic_vocab(&params, Scheme::ContinuationPrefix).map_err(|e| e.to_string())?;
    let config = ModelConfig::desk(vocab.len());

    let (mut loss_two, mut loss_rnd, mut f1_two, mut f1_rnd) = (0.0, 0.0, 0.0, 0.0);
    let mut per_seed = Vec::new();
    for seed in 0..5u64 {
        let plan_lm = TrainPlan { seed, epochs: 3, ..TrainPlan::desk(Objective::Mlm) };
        let plan_cls = TrainPlan { seed, ..TrainPlan::paper(Objective::Cls) };
        let two = two_step_finetune(&plan_lm, &plan_cls, &train, &dev, &vocab, &config, None).map_err(|e| e.to_string())?;
        let (rnd, _) = train_transformer(&plan_cls, &train, &dev, &vocab, &config, None).map_err(|e| e.to_string())?;
        let first = |log: &codemix::training::RunLog| log.epochs[0].mean_loss;
        let best_f1 = |log: &codemix::training::RunLog| {
            log.epochs[log.best_epoch - 1].dev.as_ref().and_then(|d| d.weighted_f1).unwrap_or(f64::NAN)
        };
        loss_two += first(&two.cls) / 5.0;
        loss_rnd += first(&rnd) / 5.0;
        f1_two += best_f1(&two.cls) / 5.0;
        f1_rnd += best_f1(&rnd) / 5.0;
        per_seed.push(format!("{seed}: {:.4}/{:.4}", first(&two.cls), first(&rnd)));
    }
    within(Duration::from_secs(600), start)?;
    let detail = format!(
        "initial loss two-step {loss_two:.4} vs random {loss_rnd:.4} [{}]; dev wF1 {f1_two:.3} vs {f1_rnd:.3}; {:.0?}",
        per_seed.join(", "),
        start.elapsed()
    );
    if loss_two < loss_rnd && f1_two >= f1_rnd - 0.01 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn adam_closed_form() -> Outcome {
    let mut worst = 0.0f64;
    for &lr in &[1e-5, 1e-3, 0.1] {
        for &g in &[-3.0, -1e-4, 1e-8, 0.5, 7.0, 250.0] {
            let mut p = ParamSet::new();
            p.insert("w", Tensor::scalar(1.0));
            let config = AdamConfig { lr, ..AdamConfig::default() };
            let mut opt = OptimizerState::new(config, &p);
            opt.adam_step(&mut p, &[Tensor::scalar(g)]).map_err(|e| e.to_string())?;
            let update = 1.0 - p.tensors()[0].item();
            worst = worst.max((update - lr * g / (g.abs() + config.epsilon)).abs());
        }
    }
    if worst <= 1e-7 {
        Ok(format!("max deviation {worst:.1e}"))
    } else {
        Err(format!("max deviation {worst:.3e}"))
    }
}

fn corpus_round_trip() -> Outcome {
    let mut texts = vec![std::fs::read_to_string(fixture("mixed_sentence.conll")).map_err(|e| e.to_string())?];
    for seed in 0..3 {
        let c = generate(&SyntheticParams { size: 50, seed, ..SyntheticParams::default() }).map_err(|e| e.to_string())?;
        texts.push(serialize_corpus(&c));
    }
    for (i, text) in texts.iter().enumerate() {
        let parsed = parse_corpus(text).map_err(|e| format!("fixture {i}: {e}"))?;
        if serialize_corpus(&parsed) != *text {
            return Err(format!("fixture {i}: serialize(parse(text)) differs"));
        }
        if parse_corpus(&serialize_corpus(&parsed)).map_err(|e| e.to_string())?.tweets != parsed.tweets {
            return Err(format!("fixture {i}: parse(serialize(corpus)) differs"));
        }
    }
    let hundred = generate(&SyntheticParams { size: 100, seed: 9, ..SyntheticParams::default() }).map_err(|e| e.to_string())?;
    let (train, dev) = split_corpus(&hundred, 0.9, 1).map_err(|e| e.to_string())?;
    if (train.len(), dev.len()) != (90, 10) {
        return Err(format!("split sizes ({}, {})", train.len(), dev.len()));
    }
    Ok(format!("{} fixtures round-trip; split (90, 10)", texts.len()))
}

fn tagged(counts: &[(LanguageTag, usize)]) -> Tweet {
    let tokens = counts
        .iter()
        .flat_map(|&(tag, n)| (0..n).map(move |i| Token::new(format!("w{i}"), tag)))
        .collect();
    Tweet { id: "t".into(), tokens, sentiment: SentimentLabel::Neutral }
}

fn group_boundaries() -> Outcome {
    use LanguageTag::*;
    let th = GroupThresholds::default();
    let cases = [
        (tagged(&[(Lang1, 3), (Lang2, 1)]), LanguageGroup::EnglishDominant),
        (tagged(&[(Lang1, 1), (Lang2, 3)]), LanguageGroup::SpanishDominant),
        (tagged(&[(Lang1, 3), (Other, 2)]), LanguageGroup::Other),
        (tagged(&[(Lang1, 2), (Lang2, 1), (Other, 2)]), LanguageGroup::Other),
        (tagged(&[(Lang1, 6), (Lang2, 3), (Ne, 1)]), LanguageGroup::Unassigned),
        (tagged(&[(Lang1, 2), (Lang2, 2)]), LanguageGroup::Unassigned),
    ];
    for (i, (tweet, want)) in cases.iter().enumerate() {
        let got = language_group(tweet, &th);
        if got != *want {
            return Err(format!("case {i}: got {got:?}, want {want:?}"));
        }
    }
    Ok(format!("{} boundary cases", cases.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("example sentence segmentations", example_segmentations),
        ("non-first-token counts", nft_counts),
        ("tokenizer oracle", tokenizer_oracle),
        ("weighted recall equals accuracy", recall_is_accuracy),
        ("ten-sample metric fixture", ten_sample_fixture),
        ("gradient checks", gradients),
        ("overfit smoke", overfit_smoke),
        ("two-step benefit", two_step_benefit),
        ("adam first step", adam_closed_form),
        ("corpus round trip and split", corpus_round_trip),
        ("language group boundaries", group_boundaries),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|n| n.trim().parse().ok()).collect());
    let (mut failed, mut ran) = (0, 0);
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        ran += 1;
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{}/{ran} criteria passed", ran - failed);
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
