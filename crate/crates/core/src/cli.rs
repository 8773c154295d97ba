//! The `codemix` command-line runner.
//!
//! Every command validates its flags before touching the file system, prints
//! its JSON report on standard output and, given `--out`, also writes the
//! report files below that directory. Diagnostics go to standard error as a
//! single JSON object. Exit codes: 0 success, 1 usage error, 2 data error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::corpus::{corpus_stats, parse_corpus, serialize_corpus, split_corpus, Corpus};
use crate::evaluation::{align_predictions, parse_predictions, write_predictions, EvaluationReport, GroupThresholds};
use crate::models::{BlstmConfig, BlstmModel, ModelConfig, TransformerModel};
use crate::subword::{load_vocab, nft_analysis, nft_breakdown, Scheme, SubwordVocab};
use crate::synthetic::{generate, synthetic_vocab, SyntheticParams};
use crate::tensor::Checkpoint;
use crate::training::{
    merge, parse_document, predict_blstm, predict_transformer, train, InitSource, ModelKind, Objective, TrainPlan,
};

pub const CLI_SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "codemix", version, about = "Code-mixed sentiment analysis experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sentiment and language-tag counts of a corpus
    Stats(StatsArgs),
    /// Non-first-token counts of a vocabulary over a corpus
    TokenizeAnalyze(TokenizeArgs),
    /// Train a transformer (mlm or cls) or the BLSTM baseline
    Train(TrainArgs),
    /// Label a corpus with a trained checkpoint
    Predict(PredictArgs),
    /// Weighted metrics of predictions against a gold corpus
    Evaluate(EvaluateArgs),
    /// Seeded train/dev split
    Split(SplitArgs),
    /// Write a synthetic code-mixed corpus and a matching vocabulary
    GenSynthetic(SyntheticArgs),
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TokenizeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// wordpiece or sentencepiece
    #[arg(long, default_value = "wordpiece")]
    scheme: Scheme,
    /// Include every word's segmentation
    #[arg(long)]
    per_word: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Development corpus used for epoch selection
    #[arg(long)]
    dev: Option<PathBuf>,
    /// transformer or blstm
    #[arg(long, default_value = "transformer")]
    model: ModelKind,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value = "wordpiece")]
    scheme: Scheme,
    /// JSON or TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    objective: Option<Objective>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Initialize from this checkpoint
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value = "wordpiece")]
    scheme: Scheme,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Add per-language-group reports
    #[arg(long)]
    grouped: bool,
    /// Run configuration; its `groups` table sets the thresholds
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.9)]
    train_fraction: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SyntheticArgs {
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mix_ratio: Option<f64>,
    /// Scheme of the written vocabulary
    #[arg(long, default_value = "wordpiece")]
    scheme: Scheme,
    /// Run configuration; its `synthetic` table sets generator parameters
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Serialize)]
struct Diagnostic<'a> {
    schema_version: u32,
    kind: &'a str,
    message: &'a str,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    schema_version: u32,
    command: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

/// Runs the command line `argv` (program name first) against the process
/// streams and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit report and diagnostic streams.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let _ = write!(err, "{}", e.render());
            return EXIT_USAGE;
        }
    };
    let result = match cli.command {
        Command::Stats(a) => stats(a, out),
        Command::TokenizeAnalyze(a) => tokenize_analyze(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Predict(a) => predict(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Split(a) => split(a, out),
        Command::GenSynthetic(a) => gen_synthetic(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let (kind, message) = match &e {
                CliError::Usage(m) => ("usage", m),
                CliError::Data(m) => ("data", m),
            };
            let diag = Diagnostic { schema_version: CLI_SCHEMA_VERSION, kind, message };
            let _ = writeln!(err, "{}", serde_json::to_string(&diag).expect("diagnostic serializes"));
            e.code()
        }
    }
}

fn require_inputs(paths: &[&Path]) -> Result<(), CliError> {
    for p in paths {
        if !p.is_file() {
            return Err(CliError::Data(format!("input file {} does not exist", p.display())));
        }
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_corpus(path: &Path) -> Result<Corpus, CliError> {
    let mut corpus = parse_corpus(&read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    corpus.provenance = path.display().to_string();
    Ok(corpus)
}

fn read_vocab(path: &Path, scheme: Scheme) -> Result<SubwordVocab, CliError> {
    load_vocab(&read(path)?, scheme).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_config(path: Option<&Path>) -> Result<serde_json::Map<String, serde_json::Value>, CliError> {
    let Some(path) = path else {
        return Ok(serde_json::Map::new());
    };
    let toml_syntax = path.extension().is_some_and(|e| e == "toml");
    match parse_document(&read(path)?, toml_syntax).map_err(data)? {
        serde_json::Value::Object(m) => Ok(m),
        _ => Err(CliError::Data(format!("{}: configuration must be a table", path.display()))),
    }
}

/// Overlays an optional config table onto the serialized `base`.
fn overlay<T>(base: &T, table: Option<serde_json::Value>, what: &str) -> Result<T, CliError>
where
    T: Serialize + serde::de::DeserializeOwned,
{
    let mut value = serde_json::to_value(base).expect("config serializes");
    if let Some(t) = table {
        merge(&mut value, t);
    }
    serde_json::from_value(value).map_err(|e| CliError::Data(format!("{what}: {e}")))
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    writeln!(out, "{text}").map_err(data)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    write_file(dir, name, &(serde_json::to_string_pretty(value).expect("report serializes") + "\n"))
}

fn stats(a: StatsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    require_inputs(&[&a.corpus])?;
    let corpus = read_corpus(&a.corpus)?;
    let report = Report { schema_version: CLI_SCHEMA_VERSION, command: "stats", body: &corpus_stats(&corpus) };
    if let Some(dir) = &a.out {
        write_json(dir, "stats.json", &report)?;
    }
    emit(out, &report)
}

fn tokenize_analyze(a: TokenizeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    require_inputs(&[&a.corpus, &a.vocab])?;
    let corpus = read_corpus(&a.corpus)?;
    let vocab = read_vocab(&a.vocab, a.scheme)?;
    let nft = if a.per_word { nft_breakdown(&vocab, &corpus) } else { nft_analysis(&vocab, &corpus) };
    let report = Report { schema_version: CLI_SCHEMA_VERSION, command: "tokenize-analyze", body: &nft };
    if let Some(dir) = &a.out {
        write_json(dir, "nft.json", &report)?;
    }
    emit(out, &report)
}

/// Fully resolved settings of a training run, written next to its outputs.
#[derive(Debug, Serialize)]
struct RunConfig {
    schema_version: u32,
    model_kind: ModelKind,
    corpus: PathBuf,
    dev: Option<PathBuf>,
    vocab: Option<PathBuf>,
    scheme: Option<Scheme>,
    plan: TrainPlan,
    #[serde(skip_serializing_if = "Option::is_none")]
    transformer: Option<ModelConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    blstm: Option<BlstmConfig>,
}

fn train_cmd(a: TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.model == ModelKind::Transformer && a.vocab.is_none() {
        return Err(CliError::Usage("training a transformer needs --vocab".into()));
    }
    if a.model == ModelKind::Blstm && a.objective == Some(Objective::Mlm) {
        return Err(CliError::Usage("the BLSTM baseline only supports --objective cls".into()));
    }
    if a.epochs == Some(0) {
        return Err(CliError::Usage("--epochs must be at least 1".into()));
    }
    let mut inputs: Vec<&Path> = vec![&a.corpus];
    inputs.extend(a.dev.as_deref());
    inputs.extend(a.vocab.as_deref());
    inputs.extend(a.config.as_deref());
    inputs.extend(a.checkpoint.as_deref());
    require_inputs(&inputs)?;

    let mut config = read_config(a.config.as_deref())?;
    let model_table = config.remove("model");
    let blstm_table = config.remove("blstm");
    config.remove("groups");
    config.remove("synthetic");
    if !config.contains_key("preset") && a.model == ModelKind::Blstm {
        config.insert("preset".into(), "blstm".into());
    }
    if let Some(objective) = a.objective {
        config.insert("objective".into(), serde_json::to_value(objective).expect("objective serializes"));
    }
    let mut plan = TrainPlan::from_value(serde_json::Value::Object(config)).map_err(data)?;
    if let Some(seed) = a.seed {
        plan.seed = seed;
    }
    if let Some(epochs) = a.epochs {
        plan.epochs = epochs;
    }
    if let Some(path) = &a.checkpoint {
        plan.init = InitSource::FromCheckpoint(path.clone());
    }
    plan.validate().map_err(data)?;

    let corpus = read_corpus(&a.corpus)?;
    let dev = match &a.dev {
        Some(p) => read_corpus(p)?,
        None => Corpus::default(),
    };
    let vocab = a.vocab.as_deref().map(|p| read_vocab(p, a.scheme)).transpose()?;
    let mut transformer = ModelConfig::desk(vocab.as_ref().map_or(0, SubwordVocab::len));
    if let Some(path) = &a.checkpoint {
        let ck = Checkpoint::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if ck.model_kind == "transformer" {
            transformer = serde_json::from_value(ck.config).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        }
    }
    let mut transformer: ModelConfig = overlay(&transformer, model_table, "model")?;
    if let Some(v) = &vocab {
        transformer.vocab_size = v.len();
    }
    let blstm = overlay(&BlstmConfig::desk(0), blstm_table, "blstm")?;

    let resolved = RunConfig {
        schema_version: CLI_SCHEMA_VERSION,
        model_kind: a.model,
        corpus: a.corpus.clone(),
        dev: a.dev.clone(),
        vocab: a.vocab.clone(),
        scheme: vocab.as_ref().map(|_| a.scheme),
        plan: plan.clone(),
        transformer: (a.model == ModelKind::Transformer).then_some(transformer),
        blstm: (a.model == ModelKind::Blstm).then_some(blstm),
    };
    write_json(&a.out, "run_config.json", &resolved)?;
    let (log, _) =
        train(a.model, &plan, &corpus, &dev, vocab.as_ref(), &transformer, &blstm, Some(&a.out)).map_err(data)?;
    emit(out, &log)
}

#[derive(Serialize)]
struct PredictSummary {
    model_kind: String,
    predictions: usize,
    path: PathBuf,
}

fn predict(a: PredictArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut inputs: Vec<&Path> = vec![&a.corpus, &a.checkpoint];
    inputs.extend(a.vocab.as_deref());
    require_inputs(&inputs)?;
    let ck = Checkpoint::load(&a.checkpoint).map_err(|e| CliError::Data(format!("{}: {e}", a.checkpoint.display())))?;
    let corpus = read_corpus(&a.corpus)?;
    let labels = match ck.model_kind.as_str() {
        "transformer" => {
            let Some(vocab_path) = &a.vocab else {
                return Err(CliError::Usage("a transformer checkpoint needs --vocab".into()));
            };
            let vocab = read_vocab(vocab_path, a.scheme)?;
            let model = TransformerModel::from_checkpoint(&ck, None).map_err(data)?;
            if model.config().vocab_size != vocab.len() {
                return Err(CliError::Data(format!(
                    "checkpoint expects {} vocabulary entries, {} has {}",
                    model.config().vocab_size,
                    vocab_path.display(),
                    vocab.len()
                )));
            }
            predict_transformer(&model, &vocab, &corpus.tweets).map_err(data)?
        }
        "blstm" => {
            let (model, words) = BlstmModel::from_checkpoint(&ck).map_err(data)?;
            predict_blstm(&model, &words, &corpus.tweets).map_err(data)?
        }
        other => return Err(CliError::Data(format!("unknown checkpoint model kind `{other}`"))),
    };
    let pairs: Vec<_> = corpus.tweets.iter().map(|t| t.id.clone()).zip(labels).collect();
    write_file(&a.out, "predictions.tsv", &write_predictions(&pairs))?;
    let summary = PredictSummary { model_kind: ck.model_kind, predictions: pairs.len(), path: a.out.join("predictions.tsv") };
    emit(out, &Report { schema_version: CLI_SCHEMA_VERSION, command: "predict", body: &summary })
}

fn evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut inputs: Vec<&Path> = vec![&a.gold, &a.pred];
    inputs.extend(a.config.as_deref());
    require_inputs(&inputs)?;
    let mut config = read_config(a.config.as_deref())?;
    let thresholds: GroupThresholds = overlay(&GroupThresholds::default(), config.remove("groups"), "groups")?;
    let gold = read_corpus(&a.gold)?;
    let predictions = parse_predictions(&read(&a.pred)?).map_err(|e| CliError::Data(format!("{}: {e}", a.pred.display())))?;
    let pred = align_predictions(&gold, &predictions).map_err(data)?;
    let report = EvaluationReport::build(&gold, &pred, a.grouped.then_some(&thresholds)).map_err(data)?;
    if let Some(dir) = &a.out {
        write_json(dir, "evaluation.json", &report)?;
        write_file(dir, "evaluation.csv", &report.to_csv())?;
    }
    emit(out, &report)
}

#[derive(Serialize)]
struct SplitSummary {
    train: usize,
    dev: usize,
    seed: u64,
}

fn split(a: SplitArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(a.train_fraction > 0.0 && a.train_fraction < 1.0) {
        return Err(CliError::Usage(format!("--train-fraction must lie strictly between 0 and 1, got {}", a.train_fraction)));
    }
    require_inputs(&[&a.corpus])?;
    let corpus = read_corpus(&a.corpus)?;
    let (train, dev) = split_corpus(&corpus, a.train_fraction, a.seed).map_err(data)?;
    write_file(&a.out, "train.conll", &serialize_corpus(&train))?;
    write_file(&a.out, "dev.conll", &serialize_corpus(&dev))?;
    let summary = SplitSummary { train: train.len(), dev: dev.len(), seed: a.seed };
    emit(out, &Report { schema_version: CLI_SCHEMA_VERSION, command: "split", body: &summary })
}

#[derive(Serialize)]
struct SyntheticSummary {
    params: SyntheticParams,
    scheme: Scheme,
    vocab_size: usize,
    stats: crate::corpus::CorpusStats,
}

fn gen_synthetic(a: SyntheticArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(r) = a.mix_ratio {
        if !(0.0..=1.0).contains(&r) {
            return Err(CliError::Usage(format!("--mix-ratio must lie in [0, 1], got {r}")));
        }
    }
    if a.size == Some(0) {
        return Err(CliError::Usage("--size must be at least 1".into()));
    }
    if let Some(p) = &a.config {
        require_inputs(&[p])?;
    }
    let mut config = read_config(a.config.as_deref())?;
    let mut params: SyntheticParams = overlay(&SyntheticParams::default(), config.remove("synthetic"), "synthetic")?;
    if let Some(size) = a.size {
        params.size = size;
    }
    if let Some(seed) = a.seed {
        params.seed = seed;
    }
    if let Some(r) = a.mix_ratio {
        params.mix_ratio = r;
    }
    let corpus = generate(&params).map_err(data)?;
    let vocab = synthetic_vocab(&params, a.scheme).map_err(data)?;
    write_file(&a.out, "corpus.conll", &serialize_corpus(&corpus))?;
    write_file(&a.out, "vocab.txt", &vocab.to_text())?;
    let summary = SyntheticSummary { stats: corpus_stats(&corpus), vocab_size: vocab.len(), scheme: a.scheme, params };
    emit(out, &Report { schema_version: CLI_SCHEMA_VERSION, command: "gen-synthetic", body: &summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let argv = std::iter::once("codemix").chain(args.iter().copied());
        let code = run_with(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, out, err) = run_capture(&["stats", "--corpse", "x"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(out.is_empty());
        assert!(!err.is_empty());
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("tokenize-analyze"));
    }

    #[test]
    fn missing_input_is_data_error() {
        let (code, _, err) = run_capture(&["stats", "--corpus", "/nonexistent/corpus.conll"]);
        assert_eq!(code, EXIT_DATA);
        let diag: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
        assert_eq!(diag["kind"], "data");
    }

    #[test]
    fn transformer_training_without_vocab_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let (code, _, _) = run_capture(&["train", "--corpus", "c.conll", "--out", out.to_str().unwrap()]);
        assert_eq!(code, EXIT_USAGE);
        assert!(!out.exists());
    }
}
