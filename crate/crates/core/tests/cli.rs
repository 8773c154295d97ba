use std::path::{Path, PathBuf};

use codemix::cli::{run_with, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use codemix::corpus::{corpus_stats, parse_corpus};
use codemix::evaluation::{confusion, grouped_report, metrics, GroupThresholds};
use codemix::subword::{load_vocab, nft_analysis, Scheme};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn codemix(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(std::iter::once("codemix").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stats_matches_module() {
    let path = fixture("mixed_sentence.conll");
    let (code, out, _) = codemix(&["stats", "--corpus", s(&path)]);
    assert_eq!(code, EXIT_OK);
    let json: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(json["schema_version"], 1);
    let corpus = parse_corpus(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let expected = serde_json::to_value(corpus_stats(&corpus)).unwrap();
    for key in ["sentiment_counts", "tag_counts", "tweet_count", "token_count"] {
        assert_eq!(json[key], expected[key], "{key}");
    }
    assert_eq!(json["tag_counts"]["lang2"], 5);
}

#[test]
fn tokenize_analyze_matches_module() {
    for (name, scheme, nft) in
        [("english_wp", "wordpiece", 6), ("spanish_wp", "wordpiece", 8), ("multilingual_wp", "wordpiece", 3), ("xlmr_sp", "sentencepiece", 2)]
    {
        let vocab = fixture(&format!("{name}.vocab"));
        let (code, out, err) =
            codemix(&["tokenize-analyze", "--corpus", s(&fixture("mixed_sentence.conll")), "--vocab", s(&vocab), "--scheme", scheme]);
        assert_eq!(code, EXIT_OK, "{err}");
        let json: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(json["non_first_tokens"], nft, "{name}");
        let v = load_vocab(&std::fs::read_to_string(&vocab).unwrap(), scheme.parse::<Scheme>().unwrap()).unwrap();
        let corpus = parse_corpus(&std::fs::read_to_string(fixture("mixed_sentence.conll")).unwrap()).unwrap();
        assert_eq!(json["piece_count"], nft_analysis(&v, &corpus).piece_count);
    }
}

#[test]
fn bad_scheme_is_usage_error() {
    let (code, out, _) = codemix(&[
        "tokenize-analyze",
        "--corpus",
        s(&fixture("mixed_sentence.conll")),
        "--vocab",
        s(&fixture("english_wp.vocab")),
        "--scheme",
        "bpe",
    ]);
    assert_eq!(code, EXIT_USAGE);
    assert!(out.is_empty());
}

#[test]
fn malformed_corpus_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conll");
    std::fs::write(&bad, "meta 1 happy\nhola\tlang2\n\n").unwrap();
    let (code, _, err) = codemix(&["stats", "--corpus", s(&bad)]);
    assert_eq!(code, EXIT_DATA);
    let diag: Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(diag["kind"], "data");
    assert!(diag["message"].as_str().unwrap().contains("line 1"));
}

#[test]
fn usage_errors_leave_outputs_alone() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    std::fs::create_dir(&out).unwrap();
    std::fs::write(out.join("train.conll"), "keep").unwrap();
    let corpus = s(&fixture("mixed_sentence.conll")).to_string();
    let (code, _, _) = codemix(&["split", "--corpus", &corpus, "--out", s(&out), "--train-fraction", "0"]);
    assert_eq!(code, EXIT_USAGE);
    assert_eq!(std::fs::read_to_string(out.join("train.conll")).unwrap(), "keep");
    let fresh = dir.path().join("fresh");
    let (code, _, _) = codemix(&["gen-synthetic", "--out", s(&fresh), "--mix-ratio", "2"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(!fresh.exists());
}

#[test]
fn synthetic_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let (code, _, err) = codemix(&["gen-synthetic", "--size", "120", "--seed", "7", "--out", s(&p("syn"))]);
    assert_eq!(code, EXIT_OK, "{err}");
    let (code, out, _) = codemix(&["split", "--corpus", s(&p("syn/corpus.conll")), "--seed", "2", "--out", s(&p("split"))]);
    assert_eq!(code, EXIT_OK);
    let summary: Value = serde_json::from_str(&out).unwrap();
    assert_eq!((summary["train"].as_u64(), summary["dev"].as_u64()), (Some(108), Some(12)));

    let config = p("run.toml");
    std::fs::write(&config, "preset = \"desk\"\nepochs = 5\n[model]\nnum_blocks = 1\n").unwrap();
    let train_args = |out: &str| {
        vec![
            "train".to_string(),
            "--corpus".into(),
            s(&p("split/train.conll")).into(),
            "--dev".into(),
            s(&p("split/dev.conll")).into(),
            "--vocab".into(),
            s(&p("syn/vocab.txt")).into(),
            "--config".into(),
            s(&config).into(),
            "--epochs".into(),
            "2".into(),
            "--seed".into(),
            "3".into(),
            "--out".into(),
            out.into(),
        ]
    };
    let args = train_args(s(&p("run")));
    let (code, out, err) = codemix(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, EXIT_OK, "{err}");
    let log: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(log["epochs"].as_array().unwrap().len(), 2, "flags win over the config file");
    let resolved: Value = serde_json::from_str(&std::fs::read_to_string(p("run/run_config.json")).unwrap()).unwrap();
    assert_eq!(resolved["transformer"]["num_blocks"], 1);
    assert_eq!(resolved["plan"]["seed"], 3);

    // same seed, byte-identical run log
    let args = train_args(s(&p("again")));
    assert_eq!(codemix(&args.iter().map(String::as_str).collect::<Vec<_>>()).0, EXIT_OK);
    assert_eq!(
        std::fs::read_to_string(p("run/run_log.json")).unwrap().replace(s(&p("run")), ""),
        std::fs::read_to_string(p("again/run_log.json")).unwrap().replace(s(&p("again")), "")
    );

    let (code, _, err) = codemix(&[
        "predict",
        "--corpus",
        s(&p("split/dev.conll")),
        "--checkpoint",
        s(&p("run/checkpoint.json")),
        "--vocab",
        s(&p("syn/vocab.txt")),
        "--out",
        s(&p("pred")),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");

    let (code, out, err) = codemix(&[
        "evaluate",
        "--gold",
        s(&p("split/dev.conll")),
        "--pred",
        s(&p("pred/predictions.tsv")),
        "--grouped",
        "--out",
        s(&p("eval")),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert!(p("eval/evaluation.csv").is_file());

    // the grouped report equals the module computation on the same files
    let gold = parse_corpus(&std::fs::read_to_string(p("split/dev.conll")).unwrap()).unwrap();
    let preds = codemix::evaluation::parse_predictions(&std::fs::read_to_string(p("pred/predictions.tsv")).unwrap()).unwrap();
    let pred = codemix::evaluation::align_predictions(&gold, &preds).unwrap();
    let overall = metrics(&confusion(&gold.labels(), &pred).unwrap()).unwrap();
    assert_eq!(report["overall"], serde_json::to_value(&overall).unwrap());
    let groups = grouped_report(&gold.labels(), &pred, &gold.tweets, &GroupThresholds::default()).unwrap();
    assert_eq!(report["groups"], serde_json::to_value(&groups).unwrap());

    let (code, _, _) = codemix(&[
        "predict",
        "--corpus",
        s(&p("split/dev.conll")),
        "--checkpoint",
        s(&p("run/checkpoint.json")),
        "--out",
        s(&p("nopred")),
    ]);
    assert_eq!(code, EXIT_USAGE, "transformer checkpoints need the vocabulary");
    assert!(!p("nopred").exists());
}

#[test]
fn blstm_train_and_predict() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    assert_eq!(codemix(&["gen-synthetic", "--size", "80", "--out", s(&p("syn"))]).0, EXIT_OK);
    let (code, out, err) = codemix(&[
        "train",
        "--model",
        "blstm",
        "--corpus",
        s(&p("syn/corpus.conll")),
        "--epochs",
        "2",
        "--out",
        s(&p("run")),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let log: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(log["model_kind"], "blstm");
    let (code, out, err) = codemix(&[
        "predict",
        "--corpus",
        s(&p("syn/corpus.conll")),
        "--checkpoint",
        s(&p("run/checkpoint.json")),
        "--out",
        s(&p("pred")),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let summary: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(summary["predictions"], 80);
}

#[test]
fn evaluate_rejects_misaligned_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("p.tsv");
    std::fs::write(&pred, "1\tpositive\n2\tnegative\n").unwrap();
    let (code, _, err) = codemix(&["evaluate", "--gold", s(&fixture("mixed_sentence.conll")), "--pred", s(&pred)]);
    assert_eq!(code, EXIT_DATA);
    assert!(err.contains("unknown tweet"), "{err}");
}
