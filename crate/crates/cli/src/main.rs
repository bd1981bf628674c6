use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qaner::config::{Config, CorpusConfig, ScoringMode};
use qaner::convert::{convert_dataset, ConversionMode};
use qaner::corpus::{ColumnOrder, NerDataset};
use qaner::decode::{DecodeConfig, LogitRecord, Normalization};
use qaner::eval::{self, evaluate, make_splits, manifest, DevRegime};
use qaner::pipeline::{predict_from_records, run_pipeline, scoring_requests};
use qaner::scoring::{read_logit_records, OracleScorer, OracleSpec, Scorer};
use qaner::squad::emit_squad2;
use qaner::{Error, Result};

#[derive(Parser)]
#[command(name = "qaner", version, about = "NER as extractive question answering")]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for decoding.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Sampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render one question per entity type.
    Prompts {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        template: TemplateArgs,
        /// Entity types, comma separated (default: the corpus types).
        #[arg(long, value_delimiter = ',')]
        types: Option<Vec<String>>,
    },
    /// Convert a BIO corpus to SQuAD 2.0.
    Convert {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        template: TemplateArgs,
        #[arg(long, value_enum, default_value_t = Mode::Train)]
        mode: Mode,
    },
    /// Produce a logits file for a corpus (oracle or HTTP scorer).
    Score {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        template: TemplateArgs,
        #[command(flatten)]
        scoring: ScoringArgs,
    },
    /// Decode logits into per-sentence BIO predictions.
    Decode {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        template: TemplateArgs,
        #[command(flatten)]
        scoring: ScoringArgs,
        #[command(flatten)]
        decode: DecodeArgs,
    },
    /// Score predictions against gold labels.
    Eval {
        /// Gold BIO corpus (default: config test, then train corpus).
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long, value_enum)]
        column_order: Option<Columns>,
        /// Predictions JSON Lines file.
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Write the five few-shot split manifests.
    Sample {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        n_per_type: Option<usize>,
    },
    /// Sample, convert, score, decode and evaluate all five splits.
    Pipeline {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Evaluation corpus (default: each sampled split).
        #[arg(long)]
        test: Option<PathBuf>,
        #[command(flatten)]
        template: TemplateArgs,
        #[command(flatten)]
        scoring: ScoringArgs,
        #[command(flatten)]
        decode: DecodeArgs,
        #[arg(long)]
        n_per_type: Option<usize>,
        #[arg(long, value_enum)]
        dev_regime: Option<Regime>,
    },
}

#[derive(Args)]
struct CorpusArgs {
    /// BIO corpus (default: from the config).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    column_order: Option<Columns>,
}

#[derive(Args)]
struct TemplateArgs {
    /// Pattern with [E] / <e> and optionally [MASK], or `handcraft`.
    #[arg(long)]
    template: Option<String>,
    /// Handcrafted {type: question} JSON map.
    #[arg(long)]
    handcrafted: Option<PathBuf>,
}

#[derive(Args)]
struct ScoringArgs {
    #[arg(long, value_enum)]
    scoring: Option<Scoring>,
    /// Logits JSON Lines file (`{split}` is expanded by the pipeline).
    /// Implies `--scoring file` unless a mode is given.
    #[arg(long)]
    logits: Option<PathBuf>,
    #[arg(long)]
    endpoint: Option<String>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    n_best: Option<usize>,
    #[arg(long)]
    max_answer_positions: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_enum)]
    normalization: Option<Norm>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Copy, ValueEnum)]
enum Columns {
    TokenFirst,
    TagFirst,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scoring {
    Oracle,
    File,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum Norm {
    NullContrast,
    FullSoftmax,
}

#[derive(Clone, Copy, ValueEnum)]
enum Regime {
    NoDev,
    SmallDev,
    TenPerType,
    AllDev,
}

impl From<Columns> for ColumnOrder {
    fn from(c: Columns) -> Self {
        match c {
            Columns::TokenFirst => ColumnOrder::TokenFirst,
            Columns::TagFirst => ColumnOrder::TagFirst,
        }
    }
}

impl CorpusArgs {
    /// `--input` replaces the configured train corpus.
    fn apply(&self, cfg: &mut Config) {
        if let Some(path) = &self.input {
            let mut c = CorpusConfig::new(path);
            if let Some(old) = &cfg.train {
                c.column_order = old.column_order;
                c.strict = old.strict;
            }
            cfg.train = Some(c);
        }
        if let Some(order) = self.column_order {
            for c in [cfg.train.as_mut(), cfg.test.as_mut()].into_iter().flatten() {
                c.column_order = order.into();
            }
        }
    }
}

impl TemplateArgs {
    fn apply(&self, cfg: &mut Config) {
        if let Some(t) = &self.template {
            cfg.template.pattern = Some(t.clone());
            cfg.template.prompt_set = None;
        }
        if let Some(p) = &self.handcrafted {
            cfg.template.handcrafted = Some(p.clone());
            cfg.template.prompt_set = None;
        }
    }
}

impl ScoringArgs {
    fn apply(&self, cfg: &mut Config) {
        if let Some(s) = self.scoring {
            cfg.scoring.mode = Some(match s {
                Scoring::Oracle => ScoringMode::Oracle,
                Scoring::File => ScoringMode::File,
                Scoring::Http => ScoringMode::Http,
            });
        }
        if let Some(p) = &self.logits {
            cfg.scoring.logits = Some(p.clone());
            if self.scoring.is_none() {
                cfg.scoring.mode = Some(ScoringMode::File);
            }
        }
        if let Some(e) = &self.endpoint {
            cfg.scoring.endpoint = Some(e.clone());
            if self.scoring.is_none() && self.logits.is_none() {
                cfg.scoring.mode = Some(ScoringMode::Http);
            }
        }
    }
}

impl DecodeArgs {
    fn apply(&self, cfg: &mut DecodeConfig) {
        if let Some(n) = self.n_best {
            cfg.n_best = n;
        }
        if let Some(n) = self.max_answer_positions {
            cfg.max_answer_positions = n;
        }
        if let Some(t) = self.threshold {
            cfg.prob_threshold = t;
        }
        if let Some(n) = self.normalization {
            cfg.normalization = match n {
                Norm::NullContrast => Normalization::NullContrast,
                Norm::FullSoftmax => Normalization::FullSoftmax,
            };
        }
    }
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report types serialize");
    bytes.push(b'\n');
    bytes
}

fn require_train(cfg: &Config) -> Result<&CorpusConfig> {
    cfg.train
        .as_ref()
        .ok_or_else(|| Error::Config("no corpus given (use --input or set train in the config)".into()))
}

/// The corpus scored and decoded: the test corpus if configured, else train.
fn eval_corpus(cfg: &Config) -> Result<NerDataset> {
    match &cfg.test {
        Some(test) => cfg.load_corpus(test),
        None => cfg.load_corpus(require_train(cfg)?),
    }
}

fn load_records(cfg: &Config, dataset: &NerDataset) -> Result<Vec<LogitRecord>> {
    let mode = cfg.validate_scoring()?;
    let prompts = cfg.build_prompts(&dataset.entity_types)?;
    let (instances, requests) = scoring_requests(dataset, &prompts)?;
    match mode {
        ScoringMode::File => {
            let path = cfg.scoring.logits.as_ref().expect("validated");
            read_logit_records(path)?.collect()
        }
        ScoringMode::Oracle => OracleScorer::new(OracleSpec::from_instances(&instances)).score(&requests),
        ScoringMode::Http => {
            let endpoint = cfg.scoring_endpoint().expect("validated");
            let timeout = Duration::from_secs_f64(cfg.scoring.timeout_secs);
            qaner::scoring::http::HttpScorer::new(endpoint, timeout, cfg.scoring.retries)
                .with_batching(cfg.scoring.batch_size, 1)
                .score(&requests)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.sampling.seed = seed;
    }
    let out = &cli.out;
    let jobs = cli.jobs.max(1);

    match &cli.command {
        Command::Prompts { corpus, template, types } => {
            corpus.apply(&mut cfg);
            template.apply(&mut cfg);
            cfg.validate()?;
            let types = match (types, &cfg.entity_types) {
                (Some(t), _) => t.clone(),
                (None, Some(t)) => t.clone(),
                (None, None) => cfg.load_corpus(require_train(&cfg)?)?.entity_types,
            };
            let set = cfg.build_prompts(&types)?;
            for p in &set.prompts {
                println!("{}\t{}", p.entity_type, p.question);
            }
            write_atomic(&out.join("prompts.json"), set.to_json().as_bytes())
        }
        Command::Convert { corpus, template, mode } => {
            corpus.apply(&mut cfg);
            template.apply(&mut cfg);
            cfg.validate()?;
            let dataset = cfg.load_corpus(require_train(&cfg)?)?;
            let prompts = cfg.build_prompts(&dataset.entity_types)?;
            let (mode, label) = match mode {
                Mode::Train => (ConversionMode::Train, "train"),
                Mode::Eval => (ConversionMode::Eval, "eval"),
            };
            let (instances, report) = convert_dataset(&dataset, &prompts, mode)?;
            write_atomic(
                &out.join(format!("{}.{label}.squad.json", dataset.name)),
                &emit_squad2(&instances, &dataset.name),
            )?;
            let report = to_json(&report);
            write_atomic(&out.join("conversion_report.json"), &report)?;
            print!("{}", String::from_utf8_lossy(&report));
            Ok(())
        }
        Command::Score { corpus, template, scoring } => {
            corpus.apply(&mut cfg);
            template.apply(&mut cfg);
            scoring.apply(&mut cfg);
            cfg.validate()?;
            if cfg.scoring.mode == Some(ScoringMode::File) {
                return Err(Error::Config("score needs --scoring oracle or http".into()));
            }
            let dataset = eval_corpus(&cfg)?;
            let records = load_records(&cfg, &dataset)?;
            let path = out.join("logits.jsonl");
            let mut bytes = Vec::new();
            qaner::scoring::logits_file::write_logit_lines(&mut bytes, &records)?;
            write_atomic(&path, &bytes)?;
            println!("{} records", records.len());
            Ok(())
        }
        Command::Decode { corpus, template, scoring, decode } => {
            corpus.apply(&mut cfg);
            template.apply(&mut cfg);
            scoring.apply(&mut cfg);
            decode.apply(&mut cfg.decode);
            cfg.validate()?;
            let dataset = eval_corpus(&cfg)?;
            let records = load_records(&cfg, &dataset)?;
            let (predictions, stats) = predict_from_records(&dataset, &records, &cfg.decode, jobs)?;
            let mut bytes = Vec::new();
            eval::write_predictions(&mut bytes, &predictions)?;
            write_atomic(&out.join("predictions.jsonl"), &bytes)?;
            println!(
                "{} records, {} spans, {} sentences predicted ({} dropped, {} overlaps removed)",
                stats.records,
                stats.spans,
                predictions.len(),
                stats.dropped,
                stats.overlaps_removed
            );
            Ok(())
        }
        Command::Eval {
            gold,
            column_order,
            predictions,
        } => {
            if let Some(path) = gold {
                cfg.test = Some(CorpusConfig::new(path));
            }
            if let Some(order) = column_order {
                for c in [cfg.train.as_mut(), cfg.test.as_mut()].into_iter().flatten() {
                    c.column_order = (*order).into();
                }
            }
            cfg.validate()?;
            let dataset = eval_corpus(&cfg)?;
            let file = std::fs::File::open(predictions).map_err(|e| io_error(predictions, e))?;
            let predicted = eval::read_predictions(std::io::BufReader::new(file))?;
            let report = evaluate(&dataset, &predicted)?;
            write_atomic(&out.join("report.json"), report.to_json().as_bytes())?;
            print!("{}", report.to_table());
            Ok(())
        }
        Command::Sample { corpus, n_per_type } => {
            corpus.apply(&mut cfg);
            if let Some(n) = n_per_type {
                cfg.sampling.n_per_type = *n;
            }
            cfg.validate()?;
            let dataset = cfg.load_corpus(require_train(&cfg)?)?;
            let (pool, _) = qaner::eval::carve_dev(&dataset, cfg.dev_regime, cfg.sampling.seed)?;
            let splits = make_splits(&pool, cfg.sampling.n_per_type, cfg.sampling.seed);
            let mut summary = Vec::new();
            for (i, split) in splits.iter().enumerate() {
                let ids = manifest(split);
                let mut text = ids.join("\n");
                text.push('\n');
                write_atomic(&out.join(format!("split{i}.manifest.txt")), text.as_bytes())?;
                println!("split {i}: {} sentences, mentions {:?}", ids.len(), split.total_mentions());
                summary.push(serde_json::json!({
                    "split_index": i,
                    "name": split.name,
                    "sentence_ids": ids,
                    "mentions": split.total_mentions(),
                }));
            }
            write_atomic(&out.join("manifests.json"), &to_json(&summary))
        }
        Command::Pipeline {
            corpus,
            test,
            template,
            scoring,
            decode,
            n_per_type,
            dev_regime,
        } => {
            corpus.apply(&mut cfg);
            if let Some(path) = test {
                let order = cfg.train.as_ref().map(|c| c.column_order).unwrap_or_default();
                let mut c = CorpusConfig::new(path);
                c.column_order = order;
                cfg.test = Some(c);
            }
            template.apply(&mut cfg);
            scoring.apply(&mut cfg);
            decode.apply(&mut cfg.decode);
            if let Some(n) = n_per_type {
                cfg.sampling.n_per_type = *n;
            }
            if let Some(r) = dev_regime {
                cfg.dev_regime = match r {
                    Regime::NoDev => DevRegime::NoDev,
                    Regime::SmallDev => DevRegime::SmallDev,
                    Regime::TenPerType => DevRegime::TenPerType,
                    Regime::AllDev => DevRegime::AllDev,
                };
            }
            let outcome = run_pipeline(&cfg, jobs)?;
            write_atomic(&out.join("config.json"), &to_json(&cfg))?;
            write_atomic(&out.join("prompts.json"), outcome.prompts.to_json().as_bytes())?;
            for split in &outcome.splits {
                let dir = out.join(format!("split{}", split.split_index));
                write_atomic(&dir.join("train.squad.json"), &split.train_squad)?;
                write_atomic(&dir.join("report.json"), &to_json(split))?;
                println!(
                    "split {}: {} train sentences, micro P {:.4} R {:.4} F1 {:.4}",
                    split.split_index,
                    split.train_ids.len(),
                    split.report.micro_precision,
                    split.report.micro_recall,
                    split.report.micro_f1
                );
            }
            write_atomic(&out.join("aggregate.json"), &to_json(&outcome.aggregate))?;
            let f1 = &outcome.aggregate.micro_f1;
            println!("aggregate micro F1 {:.4} +/- {:.4} over {} splits", f1.mean, f1.std, outcome.aggregate.n_reports);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {message}", e.category());
            ExitCode::FAILURE
        }
    }
}
