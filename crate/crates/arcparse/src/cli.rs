//! Command-line interface: train, parse, eval, stats, enumerate.
//!
//! Training configuration resolves as flags > config file > defaults, and
//! the resolved result is recorded in the run manifest, whose `config`
//! block can be fed back through `--config` to reproduce the run.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::evaluator::{self, decode_all, read_predictions, PunctSet};
use crate::manifest::RunManifest;
use crate::neural::{load_model, save_model, ModelDims};
use crate::oracle::{enumerate_sequences, OracleError};
use crate::par;
use crate::trainer::{self, OracleKind, TrainConfig};
use crate::transition::render_sequence;
use crate::treebank::{self, Document, PosSource};

#[derive(Parser)]
#[command(
    name = "arcparse",
    version,
    about = "Arc-standard dependency parser with ambiguity-aware oracle training"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on CoNLL-U treebanks.
    Train(TrainArgs),
    /// Parse a CoNLL-U file, replacing HEAD/DEPREL with predictions.
    Parse(ParseArgs),
    /// Score predictions against a gold treebank (UAS/LAS/UEM + arc-length recall).
    Eval(EvalArgs),
    /// Treebank statistics: branching and ambiguity counts.
    Stats(StatsArgs),
    /// Enumerate all correct transition sequences per sentence.
    Enumerate(EnumerateArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Training treebank (CoNLL-U).
    #[arg(long)]
    train: PathBuf,
    /// Development treebank for per-epoch scoring and model selection.
    #[arg(long)]
    dev: PathBuf,
    /// Output model file.
    #[arg(long)]
    model: PathBuf,
    /// Per-epoch metrics log (JSON lines). Default: <model>.metrics.jsonl
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Run manifest path. Default: <model>.manifest.json
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    oracle: Option<OracleKind>,
    /// Sample the applied transition among all correct ones (hybrid only).
    #[arg(long)]
    explore: bool,
    #[arg(long)]
    p_shift: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Punctuation tag set for dev scoring: ctb, ud-zh, upos-punct, none.
    #[arg(long)]
    punct_preset: Option<String>,
    /// POS column: xpos (with UPOS fallback) or upos.
    #[arg(long)]
    pos_column: Option<PosSource>,
    /// Worker threads for dev-set decoding.
    #[arg(long)]
    threads: Option<usize>,
}

/// Config-file schema for `train`; every field optional so files can pin
/// just what they care about. The manifest's resolved block uses the same
/// schema with everything filled in.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFileConfig {
    oracle: Option<OracleKind>,
    explore: Option<bool>,
    p_shift: Option<f64>,
    epochs: Option<usize>,
    seed: Option<u64>,
    dropout: Option<f64>,
    punct_preset: Option<String>,
    pos_column: Option<PosSource>,
    threads: Option<usize>,
    dims: Option<ModelDims>,
}

#[derive(Debug, Clone, Serialize)]
struct ResolvedTrainConfig {
    oracle: OracleKind,
    explore: bool,
    p_shift: f64,
    epochs: usize,
    seed: u64,
    dropout: f64,
    punct_preset: String,
    pos_column: PosSource,
    threads: usize,
    dims: ModelDims,
}

impl ResolvedTrainConfig {
    fn resolve(args: &TrainArgs, file: &TrainFileConfig) -> Result<Self> {
        let punct_preset = args
            .punct_preset
            .clone()
            .or_else(|| file.punct_preset.clone())
            .unwrap_or_else(|| "none".to_owned());
        if PunctSet::preset(&punct_preset).is_none() {
            bail!("unknown punctuation preset `{punct_preset}` (ctb, ud-zh, upos-punct, none)");
        }
        Ok(ResolvedTrainConfig {
            oracle: args.oracle.or(file.oracle).unwrap_or(OracleKind::Standard),
            explore: args.explore || file.explore.unwrap_or(false),
            p_shift: args.p_shift.or(file.p_shift).unwrap_or(0.5),
            epochs: args.epochs.or(file.epochs).unwrap_or(20),
            seed: args.seed.or(file.seed).unwrap_or(1),
            dropout: args.dropout.or(file.dropout).unwrap_or(0.5),
            punct_preset,
            pos_column: args.pos_column.or(file.pos_column).unwrap_or_default(),
            threads: args
                .threads
                .or(file.threads)
                .unwrap_or_else(par::default_threads),
            dims: file.dims.unwrap_or_default(),
        })
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            oracle: self.oracle,
            explore: self.explore,
            p_shift: self.p_shift,
            epochs: self.epochs,
            seed: self.seed,
            dropout: self.dropout,
            dims: self.dims,
            punct: PunctSet::preset(&self.punct_preset).expect("validated preset"),
            threads: self.threads,
        }
    }
}

#[derive(Args)]
struct ParseArgs {
    #[arg(long)]
    model: PathBuf,
    /// Input CoNLL-U (gold POS required; heads may be `_`).
    #[arg(long)]
    input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Run manifest path. Default: <output>.manifest.json when --output is set.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Punctuation tag set: ctb, ud-zh, upos-punct, none.
    #[arg(long, default_value = "none")]
    punct_preset: String,
    /// POS column of the gold file used for punctuation matching.
    #[arg(long, default_value = "xpos")]
    pos_column: PosSource,
    /// Write the JSON report here as well as stdout.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the arc-length recall table (TSV) here.
    #[arg(long)]
    tsv: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// One or more CoNLL-U files; one output row per file.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long, default_value = "xpos")]
    pos_column: PosSource,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct EnumerateArgs {
    #[arg(long)]
    input: PathBuf,
    /// Maximum number of sequences to print per sentence.
    #[arg(long, default_value_t = 64)]
    limit: usize,
    #[arg(long, default_value = "xpos")]
    pos_column: PosSource,
}

pub fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Train(args) => cmd_train(args),
        Command::Parse(args) => cmd_parse(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Enumerate(args) => cmd_enumerate(args),
    }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let file_config: TrainFileConfig = match &args.config {
        Some(path) => serde_json::from_str(
            &fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        )
        .with_context(|| format!("parsing {}", path.display()))?,
        None => TrainFileConfig::default(),
    };
    let resolved = ResolvedTrainConfig::resolve(&args, &file_config)?;
    let config = resolved.train_config();
    config.validate()?;

    let train_trees = treebank::read_conllu(&args.train, resolved.pos_column)
        .with_context(|| format!("reading {}", args.train.display()))?;
    let dev_trees = treebank::read_conllu(&args.dev, resolved.pos_column)
        .with_context(|| format!("reading {}", args.dev.display()))?;

    let mut manifest = RunManifest::new("train", serde_json::to_value(&resolved)?);
    manifest.add_input(&args.train)?;
    manifest.add_input(&args.dev)?;

    let out = trainer::train::<f32>(&train_trees, &dev_trees, &config)?;
    if out.skipped_nonprojective > 0 {
        eprintln!(
            "skipped {} non-projective training sentence(s)",
            out.skipped_nonprojective
        );
    }

    let metrics_path = args
        .metrics
        .unwrap_or_else(|| suffixed(&args.model, ".metrics.jsonl"));
    let mut metrics_file = BufWriter::new(
        File::create(&metrics_path)
            .with_context(|| format!("creating {}", metrics_path.display()))?,
    );
    for m in &out.metrics {
        writeln!(metrics_file, "{}", serde_json::to_string(m)?)?;
    }
    metrics_file.flush()?;

    save_model(
        &args.model,
        &out.params,
        &out.vocab,
        resolved.pos_column,
        None,
    )?;

    let manifest_path = args
        .manifest
        .unwrap_or_else(|| suffixed(&args.model, ".manifest.json"));
    manifest.write(&manifest_path)?;
    let best_uas = out
        .metrics
        .iter()
        .find(|m| m.epoch == out.best_epoch)
        .map(|m| m.dev_uas)
        .unwrap_or(0.0);
    eprintln!(
        "best epoch {} (dev UAS {:.2}); model -> {}, metrics -> {}, manifest -> {}",
        out.best_epoch,
        best_uas,
        args.model.display(),
        metrics_path.display(),
        manifest_path.display()
    );
    Ok(())
}

fn suffixed(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_parse(args: ParseArgs) -> Result<()> {
    let saved = load_model(&args.model)?;
    let threads = args.threads.unwrap_or_else(par::default_threads);
    let mut doc = Document::read(&args.input)?;

    let mut jobs: Vec<(usize, Vec<(String, String)>)> = Vec::new();
    for (i, sent) in doc.sentences.iter().enumerate() {
        if sent.word_count() == 0 {
            continue;
        }
        jobs.push((i, treebank::sentence_words(sent, saved.pos_source)?));
    }
    let words: Vec<Vec<(String, String)>> = jobs.iter().map(|(_, w)| w.clone()).collect();
    let preds = decode_all(&words, &saved.params, &saved.vocab, threads);
    for ((i, _), pred) in jobs.iter().zip(&preds) {
        doc.sentences[*i].set_predictions(&pred.heads, &pred.labels);
    }

    let mut manifest = RunManifest::new(
        "parse",
        serde_json::json!({
            "model": args.model.display().to_string(),
            "threads": threads,
            "pos_column": saved.pos_source,
        }),
    );
    manifest.add_input(&args.input)?;
    manifest.add_input(&args.model)?;

    match &args.output {
        Some(path) => {
            let mut out = BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            doc.write(&mut out)?;
            out.flush()?;
            let manifest_path = args
                .manifest
                .unwrap_or_else(|| suffixed(path, ".manifest.json"));
            manifest.write(&manifest_path)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            doc.write(&mut out)?;
            if let Some(path) = &args.manifest {
                manifest.write(path)?;
            }
        }
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let punct = PunctSet::preset(&args.punct_preset)
        .ok_or_else(|| anyhow!("unknown punctuation preset `{}`", args.punct_preset))?;
    let gold = treebank::read_conllu(&args.gold, args.pos_column)?;
    let preds = read_predictions(&args.pred)?;
    let report = evaluator::score(&gold, &preds, &punct)?;

    let mut manifest = RunManifest::new(
        "eval",
        serde_json::json!({
            "punct_preset": args.punct_preset,
            "pos_column": args.pos_column,
        }),
    );
    manifest.add_input(&args.gold)?;
    manifest.add_input(&args.pred)?;

    let combined = serde_json::json!({
        "report": report,
        "manifest": serde_json::to_value(&manifest)?,
    });
    let json = serde_json::to_string_pretty(&combined)?;
    println!("{json}");
    if let Some(path) = &args.json {
        fs::write(path, &json)?;
    }
    if let Some(path) = &args.tsv {
        fs::write(path, report.buckets_tsv())?;
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let threads = args.threads.unwrap_or_else(par::default_threads);
    println!("file\t{}", treebank::TreebankStats::TSV_HEADER);
    for path in &args.input {
        let trees = treebank::read_conllu(path, args.pos_column)
            .with_context(|| format!("reading {}", path.display()))?;
        let stats = treebank::compute_stats(&trees, threads);
        println!("{}\t{}", path.display(), stats.tsv_row());
    }
    Ok(())
}

fn cmd_enumerate(args: EnumerateArgs) -> Result<()> {
    let trees = treebank::read_conllu(&args.input, args.pos_column)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for (i, tree) in trees.iter().enumerate() {
        let sid = i + 1;
        match enumerate_sequences(tree, args.limit) {
            Ok(e) => {
                for seq in &e.sequences {
                    writeln!(out, "{sid}\t{}\t{}", e.total, render_sequence(seq))?;
                }
                if e.sequences.is_empty() {
                    writeln!(out, "{sid}\t{}\t(limit 0)", e.total)?;
                }
            }
            Err(OracleError::NonProjective) => {
                writeln!(out, "{sid}\t0 sequences (non-projective)")?;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}
